#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "orthoflow/integrator.hpp"
#include "orthoflow/manifold.hpp"

namespace ortho {

// Omega(X) = N S - S N with S = X^T Q X, N = diag(n), Q = diag(q), i.e.
// Omega_ij = (n_i - n_j) S_ij. This is the gradient field of
// F(X) = tr(N X^T Q X) in reverse form (X^T G - G^T X with G = 2 Q X N),
// up to the factor 2: following +Omega descends F, -Omega ascends.
SkewSymmetric sorting_omega(const ManifoldPoint& x, const Eigen::VectorXd& n_diag,
                            const Eigen::VectorXd& q_diag);

// F(X) = tr(N X^T Q X) and G = 2 Q X N.
Objective sorting_objective(Eigen::VectorXd n_diag, Eigen::VectorXd q_diag);

enum class TargetOrder { Decreasing, Increasing };

// Fraction of index pairs i < j already in the target order; 1.0 means fully
// sorted. Entries must be distinct.
double inversion_fraction(const std::vector<int>& values, TargetOrder target);

// Reads a permutation off a near-permutation matrix: repeatedly takes the
// globally largest |X[i,j]| over unassigned rows and columns (ties broken
// lexicographically). Returns perm with perm[i] = column assigned to row i.
std::vector<int> extract_permutation(const Eigen::MatrixXd& x);

struct SortingRunConfig {
  int d = 16;
  std::vector<double> etas;
  int trials = 3;
  std::uint64_t seed = 0;
  bool run_stochastic = true;
  bool run_exact = true;
  ExpBackend exact_backend = ExpBackend::pade();
  TargetOrder target = TargetOrder::Decreasing;
};

struct SortingRunResult {
  std::string integrator;  // "stoch" or "exact"
  std::string backend;     // "closed2x2", "pade", or "taylor:T"
  double eta = 0.0;
  int trial = 0;
  long steps = 0;          // steps actually taken (early stop on divergence)
  double epsilon = 0.0;    // final ||X X^T - I||_F
  double inv_fraction = 0.0;
  bool diverged = false;
};

// Sorting benchmark: for each eta and trial, integrates the ascent flow of
// tr(N X^T Q X) for ceil(50/eta) steps from a random X0 with fresh uniform
// q and N = diag(d..1), then scores how well the extracted permutation sorts
// q toward the target order. Stochastic runs use the round-robin matching
// family with |.|-proportional importance sampling (one matching per step,
// applied as closed-form column rotations); exact runs apply the dense
// exponential through the configured backend. A run whose orthogonality
// error passes 1e3 (or turns non-finite) stops early and is recorded as
// diverged with inv_fraction = nan.
std::vector<SortingRunResult> run_sorting_benchmark(const SortingRunConfig& config);

void write_sortflow_csv(std::ostream& out, const std::vector<SortingRunResult>& rows);

}  // namespace ortho
