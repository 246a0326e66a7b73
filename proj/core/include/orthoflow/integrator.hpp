#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "orthoflow/manifold.hpp"
#include "orthoflow/rng.hpp"
#include "orthoflow/sampling.hpp"

namespace ortho {

enum class Retraction { Exp, Cayley };

struct StepSchedule {
  enum class Kind { Constant, InvSqrtDecay };

  Kind kind = Kind::Constant;
  double eta0 = 1e-3;

  static StepSchedule constant(double eta0) { return checked(Kind::Constant, eta0); }
  static StepSchedule inv_sqrt(double eta0) { return checked(Kind::InvSqrtDecay, eta0); }

  // Step size for 0-based step index i.
  double at(long i) const {
    return kind == Kind::Constant ? eta0 : eta0 / std::sqrt(static_cast<double>(i + 1));
  }

 private:
  static StepSchedule checked(Kind kind, double eta0) {
    if (!(eta0 > 0.0)) throw std::invalid_argument("StepSchedule: eta0 must be positive");
    return {kind, eta0};
  }
};

struct SamplerConfig {
  enum class Kind { Exact, UniformPartition, HRegular, Family };

  Kind kind = Kind::Exact;
  int s = 2;
  WeightFunction h = WeightFunction::abs();
  HRegularOptions hreg{};
  FamilyStrategy strategy = FamilyStrategy::RoundRobin;
  FamilyDistribution distribution = FamilyDistribution::HRegular;

  static SamplerConfig exact();
  static SamplerConfig uniform(int s);
  static SamplerConfig h_regular(int s, WeightFunction h, HRegularOptions opt = {});
  static SamplerConfig family(FamilyStrategy strategy, FamilyDistribution dist,
                              WeightFunction h = WeightFunction::abs());
};

struct StepConfig {
  StepSchedule schedule{};
  Retraction retraction = Retraction::Exp;
  ExpBackend backend = ExpBackend::pade();
  SamplerConfig sampler{};
};

struct TraceRecord {
  long iter = 0;
  double objective = 0.0;
  double grad_norm_sq = 0.0;
  double orth_error = 0.0;
  long trials = 0;
  double step_seconds = 0.0;
};

struct OptimizeTrace {
  static constexpr const char* kCsvHeader =
      "iter,objective,grad_norm_sq,orth_error,trials,step_seconds";

  std::vector<TraceRecord> records;

  void write_csv(std::ostream& out) const;
};

// Objective with its unconstrained Euclidean gradient.
struct Objective {
  std::function<double(const Eigen::MatrixXd&)> value;
  std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> gradient;
};

// F(X) = tr(A^T X), maximized at the orthogonal polar factor of A.
Objective procrustes_objective(Eigen::MatrixXd a);

// Gamma(eta * Omega) X for Gamma = exp, or the Cayley map Y(-eta * Omega)
// (the sign makes both steps agree to first order in eta).
ManifoldPoint apply_skew(const ManifoldPoint& x, const SkewSymmetric& omega,
                         double eta, Retraction retraction = Retraction::Exp,
                         const ExpBackend& backend = ExpBackend::pade());

ManifoldPoint exact_step(const ManifoldPoint& x, const AmbientGradient& g,
                         double eta, Retraction retraction = Retraction::Exp,
                         const ExpBackend& backend = ExpBackend::pade());

// Applies prod_k exp(eta * scale * block_k) through per-block factors:
// closed-form rotations for pairs, small Pade exponentials otherwise. Blocks
// act on disjoint rows, so the product equals the dense-realization step
// without ever forming a d x d exponential.
ManifoldPoint stochastic_step(const ManifoldPoint& x, const SkewEstimate& estimate,
                              double eta);

// One estimator draw dispatched on the sampler kind. Exact wraps the whole
// matrix as a single block with scale 1. family_cache, when given, supplies a
// prebuilt family for Kind::Family (RoundRobin structure does not depend on
// the weights).
struct EstimateDraw {
  SkewEstimate estimate;
  long trials = 0;
};
EstimateDraw draw_estimate(const SkewSymmetric& omega, const SamplerConfig& sampler,
                           Rng& rng, const MatchingFamily* family_cache = nullptr);

// Riemannian ascent loop. Records iters+1 rows: row i describes X_i, with
// trials/step_seconds of the step that produced it (zeros for row 0).
OptimizeTrace optimize(const Objective& f, const ManifoldPoint& x0,
                       const StepConfig& config, long iters, Rng& rng);

struct EstimatorStats {
  double bias = 0.0;       // ||mean - omega||_F over n draws
  double variance = 0.0;   // mean of ||draw - omega||_F^2
};
EstimatorStats estimator_stats(const SkewSymmetric& omega, const SamplerConfig& sampler,
                               long n, Rng& rng);

}  // namespace ortho
