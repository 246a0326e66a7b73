#pragma once

#include <Eigen/Dense>

#include "orthoflow/rng.hpp"

namespace ortho {

// Tolerances used by the type gates below.
inline constexpr double kOrthTol = 1e-9;    // ||X^T X - I||_F admission gate
inline constexpr double kDetTol = 1e-9;     // |det - 1| gate for SO(d)
inline constexpr double kSkewTol = 1e-12;   // max |M + M^T| admission gate
inline constexpr double kPivotTol = 1e-12;  // Gram-Schmidt rank gate

enum class ManifoldKind { Orthogonal, SpecialOrthogonal, Stiefel };

// d x k matrix with orthonormal columns. Square for O(d)/SO(d); k <= d for
// ST(d, k). The checked constructor gates on kOrthTol (and det for SO);
// integrator steps use unchecked() since they preserve the manifold up to
// roundoff and per-step revalidation would reject benign drift.
class ManifoldPoint {
 public:
  ManifoldPoint(Eigen::MatrixXd x, ManifoldKind kind);

  static ManifoldPoint unchecked(Eigen::MatrixXd x, ManifoldKind kind);
  static ManifoldPoint identity(int d, ManifoldKind kind = ManifoldKind::Orthogonal);

  const Eigen::MatrixXd& matrix() const { return x_; }
  ManifoldKind kind() const { return kind_; }
  int rows() const { return static_cast<int>(x_.rows()); }
  int cols() const { return static_cast<int>(x_.cols()); }
  bool square() const { return x_.rows() == x_.cols(); }

 private:
  ManifoldPoint() : kind_(ManifoldKind::Orthogonal) {}

  Eigen::MatrixXd x_;
  ManifoldKind kind_;
};

// d x d skew-symmetric matrix. Entries satisfy m(i,j) == -m(j,i) exactly and
// the diagonal is exactly zero: construction scrubs roundoff after gating.
class SkewSymmetric {
 public:
  // Gates on kSkewTol, then scrubs to exact skew-symmetry.
  explicit SkewSymmetric(const Eigen::MatrixXd& m);

  // (m - m^T)/2 without the gate, for matrices skew only up to roundoff.
  static SkewSymmetric antisymmetrized(const Eigen::MatrixXd& m);
  static SkewSymmetric zero(int d);
  // Basis element H_{ij}: +1 at (i,j), -1 at (j,i), i < j.
  static SkewSymmetric basis(int d, int i, int j);
  // Gaussian entries above the diagonal, mirrored. Deterministic in rng.
  static SkewSymmetric random_gaussian(int d, Rng& rng);

  const Eigen::MatrixXd& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }

 private:
  SkewSymmetric() = default;

  Eigen::MatrixXd m_;
};

// Unconstrained Euclidean gradient of the objective at X, same shape as X.
struct AmbientGradient {
  Eigen::MatrixXd data;
  AmbientGradient(Eigen::MatrixXd m) : data(std::move(m)) {}
};

// Standard: Omega = G X^T - X G^T (left-multiplication updates).
// Reverse:  Omega = X^T G - G^T X (square points only; right-multiplication).
enum class GradientForm { Standard, Reverse };

SkewSymmetric riemannian_skew(const ManifoldPoint& x, const AmbientGradient& g,
                              GradientForm form = GradientForm::Standard);

// Omega X, the tangent-space gradient at X for the standard form.
Eigen::MatrixXd riemannian_gradient(const ManifoldPoint& x, const AmbientGradient& g);

struct ExpBackend {
  enum class Kind { Pade, Taylor, Closed2x2 };

  Kind kind = Kind::Pade;
  int taylor_order = 0;

  // Scaling-and-squaring Pade (degree 3/5/7/9/13 chosen by norm).
  static ExpBackend pade() { return {Kind::Pade, 0}; }
  // Raw truncated series sum_{k<=T} Omega^k / k!. No orthogonality guarantee;
  // low orders are kept as an instability demonstrator.
  static ExpBackend taylor(int order);
  // Closed-form rotation; requires d == 2 or support on a single (i,j) pair.
  static ExpBackend closed2x2() { return {Kind::Closed2x2, 0}; }
};

Eigen::MatrixXd matrix_exp(const SkewSymmetric& omega,
                           const ExpBackend& backend = ExpBackend::pade());

// (I + Omega/2)^{-1} (I - Omega/2). Orthogonal output; step code passes
// -eta*Omega so the Cayley step agrees with the exponential step to first
// order.
Eigen::MatrixXd cayley(const SkewSymmetric& omega);

// Plane rotation exp(t * H_{ij}): [i,i]=[j,j]=cos t, [i,j]=sin t, [j,i]=-sin t.
Eigen::MatrixXd givens(int d, int i, int j, double t);

// ||X X^T - I||_F for square X, ||X^T X - I_k||_F otherwise (equal for square).
double orthogonality_error(const Eigen::MatrixXd& x);

// Modified Gram-Schmidt on rows with renormalization. Throws on pivots below
// kPivotTol (rank-deficient input).
ManifoldPoint project_orthogonal(const Eigen::MatrixXd& m);

// Gaussian matrix followed by project_orthogonal. Deterministic in rng.
ManifoldPoint random_orthogonal(int d, Rng& rng);

}  // namespace ortho
