#include "orthoflow/integrator.hpp"

#include <chrono>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>

#include "orthoflow/matrix_io.hpp"

namespace ortho {

SamplerConfig SamplerConfig::exact() { return {}; }

SamplerConfig SamplerConfig::uniform(int s) {
  SamplerConfig c;
  c.kind = Kind::UniformPartition;
  c.s = s;
  return c;
}

SamplerConfig SamplerConfig::h_regular(int s, WeightFunction h, HRegularOptions opt) {
  SamplerConfig c;
  c.kind = Kind::HRegular;
  c.s = s;
  c.h = std::move(h);
  c.hreg = opt;
  return c;
}

SamplerConfig SamplerConfig::family(FamilyStrategy strategy, FamilyDistribution dist,
                                    WeightFunction h) {
  SamplerConfig c;
  c.kind = Kind::Family;
  c.strategy = strategy;
  c.distribution = dist;
  c.h = std::move(h);
  return c;
}

void OptimizeTrace::write_csv(std::ostream& out) const {
  out << kCsvHeader << '\n';
  for (const TraceRecord& r : records) {
    out << r.iter << ',' << format_double(r.objective) << ','
        << format_double(r.grad_norm_sq) << ',' << format_double(r.orth_error) << ','
        << r.trials << ',' << format_double(r.step_seconds) << '\n';
  }
}

Objective procrustes_objective(Eigen::MatrixXd a) {
  auto mat = std::make_shared<const Eigen::MatrixXd>(std::move(a));
  Objective f;
  f.value = [mat](const Eigen::MatrixXd& x) {
    if (x.rows() != mat->rows() || x.cols() != mat->cols())
      throw std::invalid_argument("point shape does not match target matrix");
    return mat->cwiseProduct(x).sum();
  };
  f.gradient = [mat](const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
    if (x.rows() != mat->rows() || x.cols() != mat->cols())
      throw std::invalid_argument("point shape does not match target matrix");
    return *mat;
  };
  return f;
}

ManifoldPoint apply_skew(const ManifoldPoint& x, const SkewSymmetric& omega,
                         double eta, Retraction retraction, const ExpBackend& backend) {
  if (omega.dim() != x.rows())
    throw std::invalid_argument("skew dimension does not match point");
  Eigen::MatrixXd gamma;
  if (retraction == Retraction::Exp) {
    gamma = matrix_exp(SkewSymmetric::antisymmetrized(eta * omega.matrix()), backend);
  } else {
    gamma = cayley(SkewSymmetric::antisymmetrized(-eta * omega.matrix()));
  }
  return ManifoldPoint::unchecked(gamma * x.matrix(), x.kind());
}

ManifoldPoint exact_step(const ManifoldPoint& x, const AmbientGradient& g,
                         double eta, Retraction retraction, const ExpBackend& backend) {
  return apply_skew(x, riemannian_skew(x, g), eta, retraction, backend);
}

ManifoldPoint stochastic_step(const ManifoldPoint& x, const SkewEstimate& estimate,
                              double eta) {
  if (estimate.partition.d != x.rows())
    throw std::invalid_argument("estimate dimension does not match point");
  if (estimate.block_data.size() != estimate.partition.blocks.size())
    throw std::invalid_argument("estimate blocks and data differ in length");

  Eigen::MatrixXd xm = x.matrix();
  const double c0 = eta * estimate.scale;
  for (std::size_t b = 0; b < estimate.partition.blocks.size(); ++b) {
    const auto& blk = estimate.partition.blocks[b];
    const int n = static_cast<int>(blk.size());
    if (n <= 1) continue;  // singleton blocks rotate nothing
    if (n == 2) {
      const double t = c0 * estimate.block_data[b](0, 1);
      const double c = std::cos(t);
      const double s = std::sin(t);
      const int i = blk[0];
      const int j = blk[1];
      const Eigen::RowVectorXd ri = xm.row(i);
      xm.row(i) = c * ri + s * xm.row(j);
      xm.row(j) = -s * ri + c * xm.row(j);
    } else {
      const Eigen::MatrixXd factor =
          matrix_exp(SkewSymmetric::antisymmetrized(c0 * estimate.block_data[b]));
      Eigen::MatrixXd sub(n, xm.cols());
      for (int r = 0; r < n; ++r) sub.row(r) = xm.row(blk[r]);
      sub = factor * sub;
      for (int r = 0; r < n; ++r) xm.row(blk[r]) = sub.row(r);
    }
  }
  return ManifoldPoint::unchecked(std::move(xm), x.kind());
}

EstimateDraw draw_estimate(const SkewSymmetric& omega, const SamplerConfig& sampler,
                           Rng& rng, const MatchingFamily* family_cache) {
  const int d = omega.dim();
  switch (sampler.kind) {
    case SamplerConfig::Kind::Exact: {
      std::vector<int> all(d);
      for (int i = 0; i < d; ++i) all[i] = i;
      SkewEstimate est;
      est.partition = VertexPartition::from_blocks(d, {all});
      est.block_data = {omega.matrix()};
      est.scale = 1.0;
      return {std::move(est), 0};
    }
    case SamplerConfig::Kind::UniformPartition: {
      VertexPartition t = sample_uniform_partition(d, sampler.s, rng);
      return {uniform_estimate(omega, t), 1};
    }
    case SamplerConfig::Kind::HRegular: {
      HRegularDraw draw = h_regular_sample(omega, sampler.s, sampler.h, sampler.hreg, rng);
      return {std::move(draw.estimate), draw.trials};
    }
    case SamplerConfig::Kind::Family: {
      MatchingFamily local;
      const MatchingFamily* fam = family_cache;
      if (fam == nullptr) {
        local = build_nonintersecting_family(omega, sampler.strategy);
        fam = &local;
      }
      return {importance_sample_family(omega, *fam, sampler.distribution, sampler.h, rng), 1};
    }
  }
  throw std::logic_error("unreachable sampler kind");
}

OptimizeTrace optimize(const Objective& f, const ManifoldPoint& x0,
                       const StepConfig& config, long iters, Rng& rng) {
  if (iters < 0) throw std::invalid_argument("iters must be >= 0");
  if (!f.value || !f.gradient) throw std::invalid_argument("objective callbacks must be set");

  ManifoldPoint x = x0;
  OptimizeTrace trace;
  trace.records.reserve(static_cast<std::size_t>(iters) + 1);

  // RoundRobin family structure ignores the weights, so build it once.
  const bool cache_family = config.sampler.kind == SamplerConfig::Kind::Family &&
                            config.sampler.strategy == FamilyStrategy::RoundRobin;
  std::optional<MatchingFamily> family;

  long prev_trials = 0;
  double prev_seconds = 0.0;
  for (long i = 0; i <= iters; ++i) {
    const Eigen::MatrixXd gm = f.gradient(x.matrix());
    const SkewSymmetric omega = riemannian_skew(x, gm);
    const double grad_norm_sq = x.square()
                                    ? omega.matrix().squaredNorm()
                                    : (omega.matrix() * x.matrix()).squaredNorm();
    trace.records.push_back({i, f.value(x.matrix()), grad_norm_sq,
                             orthogonality_error(x.matrix()), prev_trials, prev_seconds});
    if (i == iters) break;

    const auto t0 = std::chrono::steady_clock::now();
    const double eta = config.schedule.at(i);
    if (config.sampler.kind == SamplerConfig::Kind::Exact) {
      x = apply_skew(x, omega, eta, config.retraction, config.backend);
      prev_trials = 0;
    } else {
      try {
        if (cache_family && !family)
          family = build_nonintersecting_family(omega, config.sampler.strategy);
        EstimateDraw draw =
            draw_estimate(omega, config.sampler, rng, cache_family ? &*family : nullptr);
        x = stochastic_step(x, draw.estimate, eta);
        prev_trials = draw.trials;
      } catch (const std::exception& e) {
        throw std::runtime_error("iteration " + std::to_string(i) + ": " + e.what());
      }
    }
    prev_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return trace;
}

EstimatorStats estimator_stats(const SkewSymmetric& omega, const SamplerConfig& sampler,
                               long n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  const int d = omega.dim();

  // Omega is fixed here, so even weight-dependent families can be prebuilt.
  std::optional<MatchingFamily> family;
  const MatchingFamily* cache = nullptr;
  if (sampler.kind == SamplerConfig::Kind::Family) {
    family = build_nonintersecting_family(omega, sampler.strategy);
    cache = &*family;
  }

  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(d, d);
  double acc_sq = 0.0;
  for (long i = 0; i < n; ++i) {
    const Eigen::MatrixXd dense = draw_estimate(omega, sampler, rng, cache).estimate.dense();
    mean += dense;
    acc_sq += (dense - omega.matrix()).squaredNorm();
  }
  mean /= static_cast<double>(n);
  return {(mean - omega.matrix()).norm(), acc_sq / static_cast<double>(n)};
}

}  // namespace ortho
