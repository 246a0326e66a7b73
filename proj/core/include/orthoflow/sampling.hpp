#pragma once

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "orthoflow/manifold.hpp"
#include "orthoflow/rng.hpp"

namespace ortho {

using BigInt = boost::multiprecision::cpp_int;

// Partition of {0..d-1}. Canonical form: each block sorted ascending, blocks
// ordered by first element. Block-partition samplers (s | d) use equal-size
// blocks; matching-based estimates may carry singleton blocks for vertices a
// matching leaves unmatched.
struct VertexPartition {
  int d = 0;
  std::vector<std::vector<int>> blocks;

  // Validates disjointness and coverage of {0..d-1}, then canonicalizes.
  static VertexPartition from_blocks(int d, std::vector<std::vector<int>> blocks);

  void canonicalize();
  bool has_uniform_block_size(int s) const;

  bool operator==(const VertexPartition&) const = default;
};

// Sparse estimate scale * sum_k embed(block_data[k]) of a d x d skew matrix.
// block_data[k] is the |blocks[k]| x |blocks[k]| restriction, itself skew.
struct SkewEstimate {
  VertexPartition partition;
  std::vector<Eigen::MatrixXd> block_data;
  double scale = 1.0;

  Eigen::MatrixXd dense() const;
};

// Even, nonnegative edge-weight transform with h(0) = 0. Custom callables are
// spot-checked on sampled +-x pairs at construction.
class WeightFunction {
 public:
  enum class Kind { Abs, Square, Custom };

  static WeightFunction abs();
  static WeightFunction square();
  static WeightFunction custom(std::function<double(double)> h);

  double operator()(double x) const;
  Kind kind() const { return kind_; }

 private:
  WeightFunction(Kind kind, std::function<double(double)> fn)
      : kind_(kind), fn_(std::move(fn)) {}

  Kind kind_;
  std::function<double(double)> fn_;
};

// Edge-disjoint matchings on K_d, built to cover every edge. Edges are (i, j)
// with i < j; a vertex appears at most once per matching.
struct MatchingFamily {
  int d = 0;
  std::vector<std::vector<std::pair<int, int>>> matchings;
};

enum class FamilyStrategy { RoundRobin, GreedyHeavy };
enum class FamilyDistribution { HRegular, OptimalL2 };

struct TauViolationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MaxTrialsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Number of partitions of {0..d-1} into blocks of size s: d!/((s!)^(d/s) (d/s)!).
BigInt count_partitions(int d, int s);

// Number of those partitions containing a fixed edge:
// (d-2)!/(((d-s)/s)! (s!)^((d-s)/s) (s-2)!).
BigInt edge_multiplicity(int d, int s);

// (d-1)/(s-1), the uniform-sampling estimate scale.
double uniform_scale(int d, int s);

// Uniform draw from the equal-block-size partitions via one shuffle.
VertexPartition sample_uniform_partition(int d, int s, Rng& rng);

// All partitions in canonical order. Guarded by a 10^6 cap.
std::vector<VertexPartition> enumerate_partitions(int d, int s);

// Restriction estimate with the uniform scale (d-1)/(s-1).
SkewEstimate uniform_estimate(const SkewSymmetric& omega, const VertexPartition& t);

// Same estimate computed straight from (X, G) in the standard form, touching
// only the sampled entries: O(d s k) instead of forming the dense skew matrix.
SkewEstimate uniform_estimate_from_gradient(const ManifoldPoint& x,
                                            const AmbientGradient& g,
                                            const VertexPartition& t);

// sum_{i,j} h(omega_ij) over all d^2 entries (twice the upper triangle).
double l1_h_norm(const SkewSymmetric& omega, const WeightFunction& h);

// Unbiased subsampled version: each unordered pair kept with probability r/n,
// n = C(d,2), value scaled by n/r. r == n reproduces l1_h_norm exactly.
double mc_l1_estimate(const SkewSymmetric& omega, const WeightFunction& h,
                      double r, Rng& rng);

// h-mass of the edges internal to the partition's blocks (single-counted).
double h_block_mass(const SkewSymmetric& omega, const VertexPartition& t,
                    const WeightFunction& h);

struct HRegularOptions {
  enum class Version { I, II };

  Version version = Version::I;
  // Version II threshold tau = (s/(d*alpha*beta)) * l1; alpha, beta in (0,1].
  double alpha = 1.0;
  double beta = 1.0;
  long max_trials = 1000000;
};

struct HRegularDraw {
  SkewEstimate estimate;
  long trials = 0;
};

// Rejection sampler for the h-regular partition distribution p_T ~ h-mass(T).
// Accepted draws carry scale = l1 / (2 * h-mass(T)). Throws TauViolationError
// when a version-II threshold is exceeded and MaxTrialsError past the budget.
HRegularDraw h_regular_sample(const SkewSymmetric& omega, int s,
                              const WeightFunction& h,
                              const HRegularOptions& opt, Rng& rng);

// RoundRobin: classical rotation schedule (d-1 perfect matchings for even d,
// d near-perfect ones for odd d). GreedyHeavy: repeated greedy matchings on
// the remaining edges, heaviest |w| first, matchings ordered by total |w|.
MatchingFamily build_nonintersecting_family(const SkewSymmetric& omega,
                                            FamilyStrategy strategy);

// Draw one matching with probability proportional to its h-mass (HRegular)
// or to sqrt(sum of squared weights) (OptimalL2); estimate is the matching
// restriction scaled by 1/p. Every nonzero edge must be covered by the family.
SkewEstimate importance_sample_family(const SkewSymmetric& omega,
                                      const MatchingFamily& family,
                                      FamilyDistribution dist,
                                      const WeightFunction& h, Rng& rng);

// l1 h-norm over the doubled sum of the d(s-1)/2 heaviest entries: the
// worst-case-to-uniform sampling advantage indicator. Equals (d-1)/(s-1) for
// uniform weights and 1 at s = d.
double rho_statistic(const SkewSymmetric& omega, int s, const WeightFunction& h);

}  // namespace ortho
