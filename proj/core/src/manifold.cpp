#include "orthoflow/manifold.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ortho {

namespace {

double max_abs_asymmetry(const Eigen::MatrixXd& m) {
  return (m + m.transpose()).cwiseAbs().maxCoeff();
}

Eigen::MatrixXd givens_unchecked(int d, int i, int j, double t) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(d, d);
  const double c = std::cos(t);
  const double s = std::sin(t);
  g(i, i) = c;
  g(j, j) = c;
  g(i, j) = s;
  g(j, i) = -s;
  return g;
}

// Scaling-and-squaring Pade approximant, degree picked by the 1-norm
// (Higham's theta thresholds).
Eigen::MatrixXd expm_pade(const Eigen::MatrixXd& a_in) {
  const Eigen::Index n = a_in.rows();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  const double norm1 = a_in.cwiseAbs().colwise().sum().maxCoeff();

  static const std::vector<double> b3{120, 60, 12, 1};
  static const std::vector<double> b5{30240, 15120, 3360, 420, 30, 1};
  static const std::vector<double> b7{17297280, 8648640, 1995840, 277200,
                                      25200, 1512, 56, 1};
  static const std::vector<double> b9{17643225600., 8821612800., 2075673600.,
                                      302702400., 30270240., 2162160.,
                                      110880., 3960., 90., 1.};
  static const std::vector<double> b13{
      64764752532480000., 32382376266240000., 7771770303897600.,
      1187353796428800.,  129060195264000.,   10559470521600.,
      670442572800.,      33522128640.,       1323241920.,
      40840800.,          960960.,            16380.,
      182.,               1.};

  constexpr double theta3 = 1.495585217958292e-2;
  constexpr double theta5 = 2.539398330063230e-1;
  constexpr double theta7 = 9.504178996162932e-1;
  constexpr double theta9 = 2.097847961257068;
  constexpr double theta13 = 5.371920351148152;

  Eigen::MatrixXd a = a_in;
  int squarings = 0;
  Eigen::MatrixXd u, v;

  auto low_degree = [&](const std::vector<double>& b) {
    const Eigen::MatrixXd a2 = a * a;
    Eigen::MatrixXd uo = b[1] * id;
    Eigen::MatrixXd ve = b[0] * id;
    Eigen::MatrixXd p = id;
    for (std::size_t k = 1; 2 * k + 1 < b.size(); ++k) {
      p = p * a2;
      uo += b[2 * k + 1] * p;
      ve += b[2 * k] * p;
    }
    u = a * uo;
    v = ve;
  };

  if (norm1 <= theta3) {
    low_degree(b3);
  } else if (norm1 <= theta5) {
    low_degree(b5);
  } else if (norm1 <= theta7) {
    low_degree(b7);
  } else if (norm1 <= theta9) {
    low_degree(b9);
  } else {
    if (norm1 > theta13) {
      squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
      a /= std::ldexp(1.0, squarings);
    }
    const Eigen::MatrixXd a2 = a * a;
    const Eigen::MatrixXd a4 = a2 * a2;
    const Eigen::MatrixXd a6 = a2 * a4;
    u = a * (a6 * (b13[13] * a6 + b13[11] * a4 + b13[9] * a2) +
             b13[7] * a6 + b13[5] * a4 + b13[3] * a2 + b13[1] * id);
    v = a6 * (b13[12] * a6 + b13[10] * a4 + b13[8] * a2) +
        b13[6] * a6 + b13[4] * a4 + b13[2] * a2 + b13[0] * id;
  }

  Eigen::MatrixXd f = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) f = f * f;
  return f;
}

// Raw truncated series: no scaling, no squaring. Low orders lose
// orthogonality at large steps, which is exactly what the divergence
// experiments need.
Eigen::MatrixXd expm_taylor(const Eigen::MatrixXd& a, int order) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k <= order; ++k) {
    term = (term * a) / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

Eigen::MatrixXd expm_closed2x2(const Eigen::MatrixXd& m) {
  const int d = static_cast<int>(m.rows());
  int pi = -1, pj = -1;
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      if (m(i, j) != 0.0) {
        if (pi >= 0) {
          throw std::invalid_argument(
              "matrix_exp: closed-form backend needs d == 2 or support on a "
              "single 2x2 block");
        }
        pi = i;
        pj = j;
      }
    }
  }
  if (pi < 0) return Eigen::MatrixXd::Identity(d, d);
  return givens_unchecked(d, pi, pj, m(pi, pj));
}

}  // namespace

ManifoldPoint::ManifoldPoint(Eigen::MatrixXd x, ManifoldKind kind)
    : x_(std::move(x)), kind_(kind) {
  if (x_.rows() < 1 || x_.cols() < 1 || x_.cols() > x_.rows()) {
    throw std::invalid_argument("manifold point: need d x k with 1 <= k <= d");
  }
  if (kind_ != ManifoldKind::Stiefel && x_.rows() != x_.cols()) {
    throw std::invalid_argument("manifold point: orthogonal kinds must be square");
  }
  const double err = orthogonality_error(x_);
  if (err > kOrthTol) {
    throw std::invalid_argument("manifold point: columns not orthonormal");
  }
  if (kind_ == ManifoldKind::SpecialOrthogonal &&
      std::abs(x_.determinant() - 1.0) > kDetTol) {
    throw std::invalid_argument("manifold point: determinant must be +1");
  }
}

ManifoldPoint ManifoldPoint::unchecked(Eigen::MatrixXd x, ManifoldKind kind) {
  ManifoldPoint p;
  p.x_ = std::move(x);
  p.kind_ = kind;
  return p;
}

ManifoldPoint ManifoldPoint::identity(int d, ManifoldKind kind) {
  return unchecked(Eigen::MatrixXd::Identity(d, d), kind);
}

SkewSymmetric::SkewSymmetric(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("skew matrix must be square");
  }
  if (max_abs_asymmetry(m) > kSkewTol) {
    throw std::invalid_argument("matrix is not skew-symmetric");
  }
  m_ = 0.5 * (m - m.transpose());
  m_.diagonal().setZero();
}

SkewSymmetric SkewSymmetric::antisymmetrized(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("skew matrix must be square");
  }
  SkewSymmetric s;
  s.m_ = 0.5 * (m - m.transpose());
  s.m_.diagonal().setZero();
  return s;
}

SkewSymmetric SkewSymmetric::zero(int d) {
  SkewSymmetric s;
  s.m_ = Eigen::MatrixXd::Zero(d, d);
  return s;
}

SkewSymmetric SkewSymmetric::basis(int d, int i, int j) {
  if (i < 0 || j >= d || i >= j) {
    throw std::invalid_argument("skew basis: need 0 <= i < j < d");
  }
  SkewSymmetric s;
  s.m_ = Eigen::MatrixXd::Zero(d, d);
  s.m_(i, j) = 1.0;
  s.m_(j, i) = -1.0;
  return s;
}

SkewSymmetric SkewSymmetric::random_gaussian(int d, Rng& rng) {
  SkewSymmetric s;
  s.m_ = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      const double g = rng.normal();
      s.m_(i, j) = g;
      s.m_(j, i) = -g;
    }
  }
  return s;
}

SkewSymmetric riemannian_skew(const ManifoldPoint& x, const AmbientGradient& g,
                              GradientForm form) {
  if (g.data.rows() != x.matrix().rows() || g.data.cols() != x.matrix().cols()) {
    throw std::invalid_argument("riemannian_skew: gradient shape must match point");
  }
  if (form == GradientForm::Reverse) {
    if (!x.square()) {
      throw std::invalid_argument("riemannian_skew: reverse form needs a square point");
    }
    return SkewSymmetric::antisymmetrized(x.matrix().transpose() * g.data -
                                          g.data.transpose() * x.matrix());
  }
  return SkewSymmetric::antisymmetrized(g.data * x.matrix().transpose() -
                                        x.matrix() * g.data.transpose());
}

Eigen::MatrixXd riemannian_gradient(const ManifoldPoint& x, const AmbientGradient& g) {
  return riemannian_skew(x, g).matrix() * x.matrix();
}

ExpBackend ExpBackend::taylor(int order) {
  if (order < 1) throw std::invalid_argument("taylor backend: order must be >= 1");
  return {Kind::Taylor, order};
}

Eigen::MatrixXd matrix_exp(const SkewSymmetric& omega, const ExpBackend& backend) {
  switch (backend.kind) {
    case ExpBackend::Kind::Pade:
      return expm_pade(omega.matrix());
    case ExpBackend::Kind::Taylor:
      return expm_taylor(omega.matrix(), backend.taylor_order);
    case ExpBackend::Kind::Closed2x2:
      return expm_closed2x2(omega.matrix());
  }
  throw std::logic_error("matrix_exp: unknown backend");
}

Eigen::MatrixXd cayley(const SkewSymmetric& omega) {
  const Eigen::MatrixXd& w = omega.matrix();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(w.rows(), w.cols());
  return (id + 0.5 * w).partialPivLu().solve(id - 0.5 * w);
}

Eigen::MatrixXd givens(int d, int i, int j, double t) {
  if (d < 2) throw std::invalid_argument("givens: need d >= 2");
  if (i < 0 || j >= d || i >= j) {
    throw std::invalid_argument("givens: need 0 <= i < j < d");
  }
  return givens_unchecked(d, i, j, t);
}

double orthogonality_error(const Eigen::MatrixXd& x) {
  if (x.rows() == x.cols()) {
    return (x * x.transpose() -
            Eigen::MatrixXd::Identity(x.rows(), x.rows())).norm();
  }
  return (x.transpose() * x -
          Eigen::MatrixXd::Identity(x.cols(), x.cols())).norm();
}

ManifoldPoint project_orthogonal(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("project_orthogonal: square matrix required");
  }
  Eigen::MatrixXd q = m;
  const int d = static_cast<int>(q.rows());
  for (int i = 0; i < d; ++i) {
    const double norm = q.row(i).norm();
    if (norm <= kPivotTol) {
      throw std::runtime_error("project_orthogonal: rank-deficient input");
    }
    q.row(i) /= norm;
    for (int j = i + 1; j < d; ++j) {
      q.row(j) -= q.row(j).dot(q.row(i)) * q.row(i);
    }
  }
  return ManifoldPoint(std::move(q), ManifoldKind::Orthogonal);
}

ManifoldPoint random_orthogonal(int d, Rng& rng) {
  if (d < 1) throw std::invalid_argument("random_orthogonal: need d >= 1");
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) g(i, j) = rng.normal();
  }
  return project_orthogonal(g);
}

}  // namespace ortho
