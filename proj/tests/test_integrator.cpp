#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include "orthoflow/integrator.hpp"
#include "orthoflow/manifold.hpp"
#include "orthoflow/rng.hpp"
#include "orthoflow/sampling.hpp"

using namespace ortho;

namespace {

Eigen::MatrixXd random_dense(int r, int c, Rng& rng) {
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("step schedules") {
  const StepSchedule c = StepSchedule::constant(0.5);
  CHECK(c.at(0) == 0.5);
  CHECK(c.at(1000) == 0.5);
  const StepSchedule s = StepSchedule::inv_sqrt(0.5);
  CHECK(s.at(0) == 0.5);
  CHECK(s.at(3) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(s.at(99) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK_THROWS_AS(StepSchedule::constant(0.0), std::invalid_argument);
  CHECK_THROWS_AS(StepSchedule::inv_sqrt(-1.0), std::invalid_argument);
}

TEST_CASE("trace alignment objective") {
  Rng rng(3);
  const Eigen::MatrixXd a = random_dense(4, 4, rng);
  const Objective f = procrustes_objective(a);
  const ManifoldPoint x = random_orthogonal(4, rng);
  CHECK(f.value(x.matrix()) ==
        doctest::Approx((a.transpose() * x.matrix()).trace()).epsilon(1e-14));
  CHECK(f.gradient(x.matrix()) == a);
  CHECK_THROWS_AS(f.value(Eigen::MatrixXd::Identity(5, 5)), std::invalid_argument);
}

TEST_CASE("dense step") {
  Rng rng(7);
  const ManifoldPoint x = random_orthogonal(6, rng);
  const Eigen::MatrixXd g = random_dense(6, 6, rng);

  SUBCASE("zero gradient leaves the point") {
    const ManifoldPoint y = exact_step(x, AmbientGradient(Eigen::MatrixXd::Zero(6, 6)), 0.1);
    CHECK((y.matrix() - x.matrix()).norm() < 1e-14);
  }
  SUBCASE("zero step size is exact identity") {
    const ManifoldPoint y = exact_step(x, g, 0.0);
    CHECK(y.matrix() == x.matrix());
  }
  SUBCASE("small steps increase the objective") {
    const Objective f = procrustes_objective(g);
    const double before = f.value(x.matrix());
    const ManifoldPoint y = exact_step(x, g, 1e-4);
    CHECK(f.value(y.matrix()) > before);
  }
  SUBCASE("orthogonality is preserved") {
    ManifoldPoint y = x;
    for (int i = 0; i < 100; ++i) y = exact_step(y, g, 0.05);
    CHECK(orthogonality_error(y.matrix()) < 1e-12);
  }
  SUBCASE("rational retraction agrees to second order") {
    const ManifoldPoint ye = exact_step(x, g, 1e-3, Retraction::Exp);
    const ManifoldPoint yc = exact_step(x, g, 1e-3, Retraction::Cayley);
    CHECK(orthogonality_error(yc.matrix()) < 1e-12);
    CHECK((ye.matrix() - yc.matrix()).norm() < 1e-6);
    CHECK((ye.matrix() - yc.matrix()).norm() > 0.0);
  }
  SUBCASE("applying a given generator matches the exponential directly") {
    const SkewSymmetric om = riemannian_skew(x, g);
    const ManifoldPoint y = apply_skew(x, om, 0.01);
    const Eigen::MatrixXd expect =
        matrix_exp(SkewSymmetric::antisymmetrized(0.01 * om.matrix())) * x.matrix();
    CHECK((y.matrix() - expect).norm() < 1e-14);
  }
}

TEST_CASE("sparse factorized step") {
  Rng rng(19);

  SUBCASE("zero estimate leaves the point") {
    const ManifoldPoint x = random_orthogonal(6, rng);
    SkewEstimate est;
    est.partition = VertexPartition::from_blocks(6, {{0, 1}, {2, 3}, {4, 5}});
    est.block_data = {Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2),
                      Eigen::MatrixXd::Zero(2, 2)};
    est.scale = 5.0;
    const ManifoldPoint y = stochastic_step(x, est, 0.1);
    CHECK((y.matrix() - x.matrix()).norm() < 1e-15);
  }
  SUBCASE("single pair reduces to a plane rotation") {
    const ManifoldPoint x = random_orthogonal(4, rng);
    Eigen::MatrixXd block(2, 2);
    const double w = 0.8;
    block << 0.0, w, -w, 0.0;
    SkewEstimate est;
    est.partition = VertexPartition::from_blocks(4, {{0, 2}, {1}, {3}});
    est.block_data = {block, Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(1, 1)};
    est.scale = 3.0;
    const double eta = 0.05;
    const ManifoldPoint y = stochastic_step(x, est, eta);
    const Eigen::MatrixXd expect = givens(4, 0, 2, eta * 3.0 * w) * x.matrix();
    CHECK((y.matrix() - expect).norm() < 1e-14);
  }
  SUBCASE("matches the dense exponential of its own realization") {
    for (int rep = 0; rep < 10; ++rep) {
      const int d = 8;
      const ManifoldPoint x = random_orthogonal(d, rng);
      const SkewSymmetric om = SkewSymmetric::random_gaussian(d, rng);
      const VertexPartition t = sample_uniform_partition(d, 4, rng);
      const SkewEstimate est = uniform_estimate(om, t);
      const ManifoldPoint sparse = stochastic_step(x, est, 0.03);
      const ManifoldPoint dense =
          apply_skew(x, SkewSymmetric(est.dense()), 0.03);
      CHECK((sparse.matrix() - dense.matrix()).norm() < 1e-11);
    }
  }
  SUBCASE("rotates tall frames too") {
    Rng r2(23);
    Eigen::MatrixXd tall = random_dense(6, 2, r2);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(tall);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(6, 2);
    const ManifoldPoint x(q, ManifoldKind::Stiefel);
    const SkewSymmetric om = SkewSymmetric::random_gaussian(6, r2);
    const VertexPartition t = sample_uniform_partition(6, 2, r2);
    const SkewEstimate est = uniform_estimate(om, t);
    const ManifoldPoint y = stochastic_step(x, est, 0.05);
    CHECK(y.cols() == 2);
    CHECK(orthogonality_error(y.matrix()) < 1e-13);
    const ManifoldPoint dense = apply_skew(x, SkewSymmetric(est.dense()), 0.05);
    CHECK((y.matrix() - dense.matrix()).norm() < 1e-11);
  }
}

TEST_CASE("estimate draws") {
  Rng rng(29);
  const SkewSymmetric om = SkewSymmetric::random_gaussian(6, rng);

  SUBCASE("dense mode returns the matrix itself") {
    const EstimateDraw draw = draw_estimate(om, SamplerConfig::exact(), rng);
    CHECK(draw.estimate.dense().isApprox(om.matrix(), 1e-15));
    CHECK(draw.trials == 0);
  }
  SUBCASE("partition mode carries the fixed scale") {
    const EstimateDraw draw = draw_estimate(om, SamplerConfig::uniform(2), rng);
    CHECK(draw.estimate.scale == 5.0);
    CHECK(draw.trials == 1);
  }
  SUBCASE("rejection mode reports its trial count") {
    const EstimateDraw draw =
        draw_estimate(om, SamplerConfig::h_regular(2, WeightFunction::abs()), rng);
    CHECK(draw.trials >= 1);
  }
}

TEST_CASE("descent driver") {
  Rng rng(31);

  SUBCASE("trace length counts the initial point") {
    const Objective f = procrustes_objective(Eigen::MatrixXd::Identity(4, 4));
    StepConfig config;
    config.schedule = StepSchedule::constant(0.1);
    const OptimizeTrace trace = optimize(f, ManifoldPoint::identity(4), config, 10, rng);
    CHECK(trace.records.size() == 11);
    CHECK(trace.records.front().iter == 0);
    CHECK(trace.records.back().iter == 10);
  }
  SUBCASE("constant objective reports vanishing gradients") {
    Objective f;
    f.value = [](const Eigen::MatrixXd&) { return 1.0; };
    f.gradient = [](const Eigen::MatrixXd& x) {
      return Eigen::MatrixXd::Zero(x.rows(), x.cols());
    };
    StepConfig config;
    const OptimizeTrace trace =
        optimize(f, random_orthogonal(5, rng), config, 20, rng);
    for (const auto& r : trace.records) CHECK(r.grad_norm_sq <= 1e-12);
  }
  SUBCASE("alignment converges to the polar factor optimum") {
    const Eigen::MatrixXd a = random_dense(8, 8, rng);
    const double best = a.jacobiSvd().singularValues().sum();
    const Objective f = procrustes_objective(a);
    StepConfig config;
    config.schedule = StepSchedule::constant(0.1);
    const OptimizeTrace trace =
        optimize(f, random_orthogonal(8, rng), config, 400, rng);
    CHECK(trace.records.back().objective == doctest::Approx(best).epsilon(1e-6));
  }
  SUBCASE("identical seeds give identical traces") {
    const Eigen::MatrixXd a = random_dense(6, 6, rng);
    const Objective f = procrustes_objective(a);
    StepConfig config;
    config.sampler = SamplerConfig::uniform(2);
    config.schedule = StepSchedule::inv_sqrt(0.1);
    Rng r1(5), r2(5);
    const ManifoldPoint x0 = random_orthogonal(6, rng);
    const OptimizeTrace t1 = optimize(f, x0, config, 50, r1);
    const OptimizeTrace t2 = optimize(f, x0, config, 50, r2);
    REQUIRE(t1.records.size() == t2.records.size());
    for (std::size_t i = 0; i < t1.records.size(); ++i) {
      CHECK(t1.records[i].objective == t2.records[i].objective);
      CHECK(t1.records[i].grad_norm_sq == t2.records[i].grad_norm_sq);
    }
  }
  SUBCASE("sampler failures carry the iteration index") {
    const Eigen::MatrixXd a = random_dense(4, 4, rng);
    const Objective f = procrustes_objective(a);
    StepConfig config;
    config.sampler = SamplerConfig::h_regular(2, WeightFunction::abs());
    config.sampler.hreg.max_trials = 0;  // invalid on purpose
    try {
      optimize(f, random_orthogonal(4, rng), config, 5, rng);
      FAIL("expected a sampler error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("iteration 0") != std::string::npos);
    }
  }
}

TEST_CASE("estimator statistics") {
  Rng rng(37);
  const SkewSymmetric om = SkewSymmetric::random_gaussian(6, rng);

  SUBCASE("dense sampling is noiseless") {
    const EstimatorStats stats = estimator_stats(om, SamplerConfig::exact(), 100, rng);
    CHECK(stats.bias < 1e-12);
    CHECK(stats.variance < 1e-24);
  }
  SUBCASE("partition sampling hits its predicted spread") {
    const double target = 4.0 * om.matrix().squaredNorm();
    const EstimatorStats stats =
        estimator_stats(om, SamplerConfig::uniform(2), 100000, rng);
    CHECK(stats.variance == doctest::Approx(target).epsilon(0.05));
    const EstimatorStats sq = estimator_stats(
        om, SamplerConfig::h_regular(2, WeightFunction::square()), 100000, rng);
    CHECK(sq.variance == doctest::Approx(target).epsilon(0.05));
  }
}

TEST_CASE("trace serialization") {
  OptimizeTrace trace;
  trace.records.push_back({0, 1.5, 0.25, 1e-15, 0, 0.0});
  trace.records.push_back({1, 2.0, 0.125, 2e-15, 3, 0.5});
  std::ostringstream out;
  trace.write_csv(out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "iter,objective,grad_norm_sq,orth_error,trials,step_seconds");
  std::getline(in, line);
  CHECK(line == "0,1.5,0.25,1.0000000000000001e-15,0,0");
  std::getline(in, line);
  CHECK(line == "1,2,0.125,2.0000000000000002e-15,3,0.5");
  CHECK(!std::getline(in, line));
}
