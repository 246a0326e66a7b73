#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "orthoflow/flows.hpp"
#include "orthoflow/integrator.hpp"
#include "orthoflow/manifold.hpp"
#include "orthoflow/rng.hpp"

using namespace ortho;

namespace {

Eigen::VectorXd iota_desc(int d) {
  Eigen::VectorXd n(d);
  for (int i = 0; i < d; ++i) n(i) = d - i;
  return n;
}

}  // namespace

TEST_CASE("sorting generator") {
  const int d = 5;
  Rng rng(3);
  const Eigen::VectorXd n = iota_desc(d);
  Eigen::VectorXd q(d);
  for (int i = 0; i < d; ++i) q(i) = rng.uniform();

  SUBCASE("definition check against dense algebra") {
    const ManifoldPoint x = random_orthogonal(d, rng);
    const Eigen::MatrixXd s =
        x.matrix().transpose() * q.asDiagonal() * x.matrix();
    const Eigen::MatrixXd expect =
        n.asDiagonal() * s - s * n.asDiagonal().toDenseMatrix();
    CHECK(sorting_omega(x, n, q).matrix().isApprox(expect, 1e-13));
  }
  SUBCASE("vanishes at any coordinate permutation") {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(d, d);
    p(0, 3) = 1.0;
    p(1, 0) = 1.0;
    p(2, 4) = 1.0;
    p(3, 1) = 1.0;
    p(4, 2) = 1.0;
    const ManifoldPoint x(p, ManifoldKind::Orthogonal);
    CHECK(sorting_omega(x, n, q).matrix().norm() < 1e-12);
  }
  SUBCASE("flowing along it descends the potential") {
    const ManifoldPoint x0 = random_orthogonal(d, rng);
    const Objective f = sorting_objective(n, q);
    const SkewSymmetric om = sorting_omega(x0, n, q);
    const ManifoldPoint x1 = apply_skew(x0, om, 1e-3);
    CHECK(f.value(x1.matrix()) < f.value(x0.matrix()));
  }
  SUBCASE("potential gradient matches its value map") {
    const ManifoldPoint x = random_orthogonal(d, rng);
    const Objective f = sorting_objective(n, q);
    const Eigen::MatrixXd xm = x.matrix();
    CHECK(f.value(xm) ==
          doctest::Approx((n.asDiagonal().toDenseMatrix() * xm.transpose() *
                           q.asDiagonal() * xm)
                              .trace())
              .epsilon(1e-13));
    CHECK(f.gradient(xm).isApprox(
        2.0 * (q.asDiagonal() * xm * n.asDiagonal()), 1e-13));
  }
}

TEST_CASE("inversion fraction") {
  CHECK(inversion_fraction({4, 3, 2, 1}, TargetOrder::Decreasing) == 1.0);
  CHECK(inversion_fraction({1, 2, 3, 4}, TargetOrder::Decreasing) == 0.0);
  CHECK(inversion_fraction({1, 2, 3, 4}, TargetOrder::Increasing) == 1.0);
  CHECK(inversion_fraction({2, 1, 3, 4}, TargetOrder::Increasing) ==
        doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(inversion_fraction({7}, TargetOrder::Increasing) == 1.0);
  CHECK(inversion_fraction({}, TargetOrder::Decreasing) == 1.0);
}

TEST_CASE("permutation recovery") {
  SUBCASE("exact permutation matrix") {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(4, 4);
    p(0, 2) = 1.0;
    p(1, 0) = 1.0;
    p(2, 3) = 1.0;
    p(3, 1) = 1.0;
    CHECK(extract_permutation(p) == std::vector<int>{2, 0, 3, 1});
  }
  SUBCASE("sign flips and noise are tolerated") {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 3);
    p(0, 1) = -0.98;
    p(1, 2) = 0.97;
    p(2, 0) = -0.99;
    Rng rng(7);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) p(i, j) += 0.05 * rng.normal();
    CHECK(extract_permutation(p) == std::vector<int>{1, 2, 0});
  }
}

TEST_CASE("sorting benchmark driver") {
  SUBCASE("validation") {
    SortingRunConfig bad;
    bad.d = 1;
    CHECK_THROWS_AS(run_sorting_benchmark(bad), std::invalid_argument);
    SortingRunConfig empty;
    empty.etas.clear();
    CHECK_THROWS_AS(run_sorting_benchmark(empty), std::invalid_argument);
    SortingRunConfig zero;
    zero.etas = {0.0};
    CHECK_THROWS_AS(run_sorting_benchmark(zero), std::invalid_argument);
    SortingRunConfig trials;
    trials.etas = {0.1};
    trials.trials = 0;
    CHECK_THROWS_AS(run_sorting_benchmark(trials), std::invalid_argument);
  }
  SUBCASE("row layout and determinism") {
    SortingRunConfig config;
    config.d = 6;
    config.etas = {0.01, 0.05};
    config.trials = 2;
    config.seed = 42;
    const auto rows = run_sorting_benchmark(config);
    REQUIRE(rows.size() == 8);
    CHECK(rows[0].integrator == "stoch");
    CHECK(rows[0].backend == "closed2x2");
    CHECK(rows[4].integrator == "exact");
    CHECK(rows[4].backend == "pade");
    const auto again = run_sorting_benchmark(config);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(rows[i].epsilon == again[i].epsilon);
      CHECK(rows[i].inv_fraction == again[i].inv_fraction);
    }
  }
  SUBCASE("both integrators sort a small instance at a moderate step") {
    SortingRunConfig config;
    config.d = 6;
    config.etas = {0.01};
    config.trials = 2;
    config.seed = 11;
    for (const auto& row : run_sorting_benchmark(config)) {
      CHECK(!row.diverged);
      CHECK(row.inv_fraction == 1.0);
      CHECK(row.epsilon < 1e-10);
      CHECK(row.steps == 5000);
    }
  }
  SUBCASE("low-order series backend breaks down where the default stays put") {
    SortingRunConfig config;
    config.d = 16;
    config.etas = {0.15};
    config.trials = 2;
    config.seed = 20260818;
    config.run_stochastic = false;
    config.exact_backend = ExpBackend::taylor(1);
    const auto rows = run_sorting_benchmark(config);
    bool any_diverged = false;
    for (const auto& row : rows) {
      CHECK(row.backend == "taylor:1");
      if (row.diverged) {
        any_diverged = true;
        CHECK(std::isnan(row.inv_fraction));
      }
    }
    CHECK(any_diverged);

    config.exact_backend = ExpBackend::pade();
    for (const auto& row : run_sorting_benchmark(config)) {
      CHECK(!row.diverged);
      CHECK(row.epsilon < 1e-10);
    }
  }
}

TEST_CASE("benchmark csv shape") {
  SortingRunResult row;
  row.integrator = "exact";
  row.backend = "pade";
  row.eta = 0.01;
  row.trial = 2;
  row.steps = 5000;
  row.epsilon = 1e-13;
  row.inv_fraction = 0.875;
  row.diverged = false;
  std::ostringstream out;
  write_sortflow_csv(out, {row});
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "integrator,backend,eta,trial,steps,epsilon,inv_fraction,diverged");
  std::getline(in, line);
  CHECK(line == "exact,pade,0.01,2,5000,1e-13,0.875,0");
}
