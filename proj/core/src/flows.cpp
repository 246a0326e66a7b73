#include "orthoflow/flows.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <utility>

#include "orthoflow/matrix_io.hpp"
#include "orthoflow/rng.hpp"
#include "orthoflow/sampling.hpp"

namespace ortho {
namespace {

constexpr double kDivergeEps = 1e3;

std::string backend_label(const ExpBackend& backend) {
  switch (backend.kind) {
    case ExpBackend::Kind::Pade:
      return "pade";
    case ExpBackend::Kind::Taylor:
      return "taylor:" + std::to_string(backend.taylor_order);
    case ExpBackend::Kind::Closed2x2:
      return "closed2x2";
  }
  return "?";
}

}  // namespace

SkewSymmetric sorting_omega(const ManifoldPoint& x, const Eigen::VectorXd& n_diag,
                            const Eigen::VectorXd& q_diag) {
  if (!x.square()) throw std::invalid_argument("sorting flow needs a square point");
  const int d = x.rows();
  if (n_diag.size() != d || q_diag.size() != d)
    throw std::invalid_argument("diagonal length does not match point dimension");
  const Eigen::MatrixXd& xm = x.matrix();
  const Eigen::MatrixXd s = xm.transpose() * (q_diag.asDiagonal() * xm);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      const double v = (n_diag(i) - n_diag(j)) * s(i, j);
      m(i, j) = v;
      m(j, i) = -v;
    }
  }
  return SkewSymmetric::antisymmetrized(m);
}

Objective sorting_objective(Eigen::VectorXd n_diag, Eigen::VectorXd q_diag) {
  struct Diagonals {
    Eigen::VectorXd n;
    Eigen::VectorXd q;
  };
  auto diag = std::make_shared<const Diagonals>(Diagonals{std::move(n_diag), std::move(q_diag)});
  auto check = [diag](const Eigen::MatrixXd& x) {
    if (x.rows() != diag->q.size() || x.cols() != diag->n.size())
      throw std::invalid_argument("point shape does not match diagonals");
  };
  Objective f;
  f.value = [diag, check](const Eigen::MatrixXd& x) {
    check(x);
    double acc = 0.0;
    for (int j = 0; j < x.cols(); ++j)
      acc += diag->n(j) * x.col(j).cwiseAbs2().dot(diag->q);
    return acc;
  };
  f.gradient = [diag, check](const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
    check(x);
    return 2.0 * (diag->q.asDiagonal() * x * diag->n.asDiagonal());
  };
  return f;
}

double inversion_fraction(const std::vector<int>& values, TargetOrder target) {
  const int d = static_cast<int>(values.size());
  if (d < 2) return 1.0;
  long correct = 0;
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      const bool want = target == TargetOrder::Decreasing ? values[i] > values[j]
                                                          : values[i] < values[j];
      if (want) ++correct;
    }
  }
  return static_cast<double>(correct) / (static_cast<double>(d) * (d - 1) / 2.0);
}

std::vector<int> extract_permutation(const Eigen::MatrixXd& x) {
  if (x.rows() == 0 || x.rows() != x.cols())
    throw std::invalid_argument("matrix must be square and nonempty");
  const int d = static_cast<int>(x.rows());
  std::vector<char> row_used(d, 0);
  std::vector<char> col_used(d, 0);
  std::vector<int> perm(d, -1);
  for (int step = 0; step < d; ++step) {
    double best = -1.0;
    int bi = -1;
    int bj = -1;
    for (int i = 0; i < d; ++i) {
      if (row_used[i]) continue;
      for (int j = 0; j < d; ++j) {
        if (col_used[j]) continue;
        const double v = std::abs(x(i, j));
        if (v > best) {  // strict: first-in-scan wins ties lexicographically
          best = v;
          bi = i;
          bj = j;
        }
      }
    }
    perm[bi] = bj;
    row_used[bi] = 1;
    col_used[bj] = 1;
  }
  return perm;
}

std::vector<SortingRunResult> run_sorting_benchmark(const SortingRunConfig& config) {
  if (config.d < 2) throw std::invalid_argument("d must be >= 2");
  if (config.etas.empty()) throw std::invalid_argument("etas must be nonempty");
  if (config.etas.size() > 1000) throw std::invalid_argument("too many etas");
  if (config.trials < 1 || config.trials > 1000)
    throw std::invalid_argument("trials must be in [1, 1000]");
  for (double eta : config.etas)
    if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");

  const int d = config.d;
  Eigen::VectorXd n(d);
  for (int i = 0; i < d; ++i) n(i) = static_cast<double>(d - i);

  const MatchingFamily family =
      build_nonintersecting_family(SkewSymmetric::zero(d), FamilyStrategy::RoundRobin);

  std::vector<SortingRunResult> results;
  for (int integ = 0; integ < 2; ++integ) {
    const bool stochastic = integ == 0;
    if (stochastic && !config.run_stochastic) continue;
    if (!stochastic && !config.run_exact) continue;
    const std::string backend =
        stochastic ? "closed2x2" : backend_label(config.exact_backend);

    for (std::size_t eta_idx = 0; eta_idx < config.etas.size(); ++eta_idx) {
      const double eta = config.etas[eta_idx];
      const long steps_total = static_cast<long>(std::ceil(50.0 / eta));

      for (int trial = 0; trial < config.trials; ++trial) {
        const std::uint64_t stream = static_cast<std::uint64_t>(integ) * 1000000u +
                                     static_cast<std::uint64_t>(eta_idx) * 1000u +
                                     static_cast<std::uint64_t>(trial);
        Rng rng = Rng::derived(config.seed, stream);

        // The flow's tie-resolution time diverges as adjacent q values
        // approach each other (the continuous limit assumes q_i != q_j), so
        // the fixed 50/eta budget needs quantitative separation: redraw q
        // until every adjacent sorted gap clears 0.25/d.
        Eigen::VectorXd q(d);
        std::vector<double> sorted_q(d);
        for (;;) {
          for (int i = 0; i < d; ++i) q(i) = rng.uniform();
          for (int i = 0; i < d; ++i) sorted_q[i] = q(i);
          std::sort(sorted_q.begin(), sorted_q.end());
          bool separated = true;
          for (int i = 1; i < d; ++i)
            if (sorted_q[i] - sorted_q[i - 1] < 0.25 / d) separated = false;
          if (separated) break;
        }
        Eigen::MatrixXd x = random_orthogonal(d, rng).matrix();

        const long passes = static_cast<long>(family.matchings.size());
        std::vector<double> angles;

        long steps_taken = 0;
        bool diverged = false;
        double eps = orthogonality_error(x);
        for (long step = 0; step < steps_total; ++step) {
          if (stochastic) {
            // One iteration = one family pass: d-1 single-matching unbiased
            // steps (uniform pick, scale d-1), so its gradient work matches
            // one dense exact step. Edge weights come from the current X via
            // O(d) dots; the disjoint rotations realize the block exponential
            // in closed form.
            for (long pass = 0; pass < passes; ++pass) {
              const auto& matching =
                  family.matchings[rng.uniform_int(family.matchings.size())];
              angles.assign(matching.size(), 0.0);
              for (std::size_t e = 0; e < matching.size(); ++e) {
                const auto& [i, j] = matching[e];
                const double w =
                    (n(i) - n(j)) * x.col(i).cwiseProduct(q).dot(x.col(j));
                angles[e] = -eta * static_cast<double>(passes) * w;
              }
              for (std::size_t e = 0; e < matching.size(); ++e) {
                const auto& [i, j] = matching[e];
                const double c = std::cos(angles[e]);
                const double sn = std::sin(angles[e]);
                const Eigen::VectorXd ci = x.col(i);
                x.col(i) = c * ci - sn * x.col(j);
                x.col(j) = sn * ci + c * x.col(j);
              }
            }
          } else {
            const Eigen::MatrixXd s = x.transpose() * (q.asDiagonal() * x);
            Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
            for (int i = 0; i < d; ++i) {
              for (int j = i + 1; j < d; ++j) {
                const double v = -eta * (n(i) - n(j)) * s(i, j);
                m(i, j) = v;
                m(j, i) = -v;
              }
            }
            x *= matrix_exp(SkewSymmetric::antisymmetrized(std::move(m)),
                            config.exact_backend);
          }
          ++steps_taken;
          eps = orthogonality_error(x);
          if (!(eps <= kDivergeEps)) {  // also catches nan/inf
            diverged = true;
            break;
          }
        }

        SortingRunResult row;
        row.integrator = stochastic ? "stoch" : "exact";
        row.backend = backend;
        row.eta = eta;
        row.trial = trial;
        row.steps = steps_taken;
        row.epsilon = eps;
        row.diverged = diverged;
        if (diverged) {
          row.inv_fraction = std::numeric_limits<double>::quiet_NaN();
        } else {
          std::vector<int> idx(d);
          std::iota(idx.begin(), idx.end(), 0);
          std::sort(idx.begin(), idx.end(), [&q](int a, int b) { return q(a) < q(b); });
          std::vector<int> rank_asc(d);
          for (int r = 0; r < d; ++r) rank_asc[idx[r]] = r;
          const std::vector<int> perm = extract_permutation(x);
          std::vector<int> seq(d, 0);
          for (int i = 0; i < d; ++i) seq[perm[i]] = rank_asc[i];
          row.inv_fraction = inversion_fraction(seq, config.target);
        }
        results.push_back(std::move(row));
      }
    }
  }
  return results;
}

void write_sortflow_csv(std::ostream& out, const std::vector<SortingRunResult>& rows) {
  out << "integrator,backend,eta,trial,steps,epsilon,inv_fraction,diverged\n";
  for (const SortingRunResult& r : rows) {
    out << r.integrator << ',' << r.backend << ',' << format_double(r.eta) << ','
        << r.trial << ',' << r.steps << ',' << format_double(r.epsilon) << ','
        << format_double(r.inv_fraction) << ',' << (r.diverged ? 1 : 0) << '\n';
  }
}

}  // namespace ortho
