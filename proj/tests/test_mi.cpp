#include "doctest.h"

#include "pret/dgp.hpp"
#include "pret/moment_inequalities.hpp"
#include "pret/stat_kernels.hpp"

#include <cmath>
#include <stdexcept>

using namespace pret;

namespace {

// tiny sample where the scaled index is exactly zero at psi = (theta=1, 1)
Sample index_zero_sample(double s_value) {
  Sample s;
  s.n = 1;
  s.s = VectorXd::Constant(1, s_value);
  s.price = VectorXd::Ones(1);
  s.x = MatrixXd::Ones(1, 1);
  s.z = s.x;
  return s;
}

PsiPoint unit_psi(int k = 1) {
  PsiPoint p;
  p.theta = VectorXd::Ones(k);
  p.sigma_eps = 1.0;
  return p;
}

}  // namespace

TEST_SUITE("mi") {

TEST_CASE("base moments at a zero index") {
  const double m0 = std::sqrt(2.0 / M_PI);  // phi(0)/Phi(0)
  {
    Sample s = index_zero_sample(1.0);
    auto [rp1, rp2] = rp_moments(unit_psi(), s, 0);
    auto [ob1, ob2] = ob_moments(unit_psi(), s, 0);
    CHECK(rp1 == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(rp2 == doctest::Approx(m0).epsilon(1e-12));
    CHECK(ob1 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ob2 == doctest::Approx(-1.0).epsilon(1e-12));
  }
  {
    Sample s = index_zero_sample(0.0);
    auto [rp1, rp2] = rp_moments(unit_psi(), s, 0);
    auto [ob1, ob2] = ob_moments(unit_psi(), s, 0);
    CHECK(rp1 == doctest::Approx(m0).epsilon(1e-12));
    CHECK(rp2 == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(ob1 == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(ob2 == doctest::Approx(1.0).epsilon(1e-12));
  }
  Sample s = index_zero_sample(1.0);
  PsiPoint bad = unit_psi();
  bad.sigma_eps = 0.0;
  CHECK_THROWS_AS(rp_moments(bad, s, 0), std::invalid_argument);
}

TEST_CASE("moment-set layout and counts") {
  Scenario sc = find_scenario("sim2");
  sc.spec.n = 500;
  Sample s = generate(sc.spec).observed();
  MomentSet ms = build_unconditional_moments(unit_psi(), s, {1});
  CHECK(ms.L() == 12);
  CHECK(ms.labels[0] == "rp1:const");
  CHECK(ms.labels[4] == "rp1:z_2>med");
  CHECK(ms.labels[8] == "rp1:z_2<=med");
  MomentSet ms0 = build_unconditional_moments(unit_psi(), s, {});
  CHECK(ms0.L() == 4);
  MomentSet ms2 = build_unconditional_moments(unit_psi(), s, {0, 1});
  CHECK(ms2.L() == 20);
  CHECK_THROWS_AS(build_unconditional_moments(unit_psi(), s, {7}),
                  std::invalid_argument);
}

TEST_CASE("criterion arithmetic") {
  MomentSet ms;
  ms.values = MatrixXd::Zero(4, 1);
  ms.means = VectorXd::Constant(1, -1.0);
  ms.sds = VectorXd::Constant(1, 1.0);
  ms.labels = {"rp1:const"};
  CHECK(q_statistic(ms, 100) == doctest::Approx(100.0).epsilon(1e-14));
  ms.means(0) = 1.0;  // slack moment contributes nothing
  CHECK(q_statistic(ms, 100) == 0.0);
}

TEST_CASE("all-slack moments give zero criterion and zero cutoff") {
  // means far above zero relative to sqrt(ln n): nothing binds
  const int n = 400;
  MomentSet ms;
  ms.values.resize(n, 2);
  RngStream rng(3, 0);
  for (int i = 0; i < n; ++i) {
    ms.values(i, 0) = 50.0 + rng.next_normal();
    ms.values(i, 1) = 80.0 + rng.next_normal();
  }
  ms.means = ms.values.colwise().mean();
  ms.sds.resize(2);
  for (int j = 0; j < 2; ++j)
    ms.sds(j) = std::sqrt(
        (ms.values.col(j).array() - ms.means(j)).square().mean());
  ms.labels = {"rp1:const", "rp2:const"};
  CHECK(q_statistic(ms, n) == 0.0);
  RngStream cvr(3, 1);
  CHECK(as_critical_value(ms, n, 0.05, 1000, cvr) == 0.0);
}

TEST_CASE("one binding moment reproduces the one-sided normal cutoff") {
  // a single standardized binding moment simulates min(Z,0)^2, whose 95%
  // quantile is (1.645)^2 = 2.706
  const int n = 10000;
  MomentSet ms;
  ms.values.resize(n, 1);
  RngStream rng(9, 0);
  for (int i = 0; i < n; ++i) ms.values(i, 0) = rng.next_normal();
  ms.means = ms.values.colwise().mean();
  ms.sds.resize(1);
  ms.sds(0) =
      std::sqrt((ms.values.col(0).array() - ms.means(0)).square().mean());
  ms.labels = {"rp1:const"};
  RngStream cvr(9, 1);
  const double cv = as_critical_value(ms, n, 0.05, 10000, cvr);
  CHECK(std::abs(cv - 2.706) < 0.15);
  CHECK_THROWS_AS(as_critical_value(ms, n, 0.05, 50, cvr),
                  std::invalid_argument);
}

TEST_CASE("inequalities hold at the true parameters") {
  Scenario sc = find_scenario("A1");
  sc.spec.n = 50000;
  Sample s = generate(sc.spec).observed();
  ScenarioTargets t = analytic_targets(sc.spec, sc.default_instruments);
  PsiPoint psi;
  psi.theta = t.theta_true;
  psi.sigma_eps = t.sigma_xi_true;
  MomentSet ms =
      build_unconditional_moments(psi, s, sc.default_instruments);
  for (int l = 0; l < ms.L(); ++l)
    CHECK(ms.means(l) > -2.0 * ms.sds(l) / std::sqrt(double(s.n)));
}

TEST_CASE("criterion grows away from the truth") {
  Scenario sc = find_scenario("A1");
  sc.spec.n = 5000;
  Sample s = generate(sc.spec).observed();
  MiOptions opts;
  opts.seed = 4;
  MmmEngine engine(s, sc.default_instruments, opts);
  PsiPoint truth;
  truth.theta = VectorXd::Ones(1);
  truth.sigma_eps = 2.0;
  const double q_true = engine.q_only(truth);
  PsiPoint off = truth;
  off.theta(0) = 3.0;
  CHECK(engine.q_only(off) > q_true + 10.0);
  // small perturbations move Q continuously
  PsiPoint nudge = truth;
  nudge.theta(0) += 1e-6;
  CHECK(std::abs(engine.q_only(nudge) - q_true) < 1e-2);
}

TEST_CASE("point test is deterministic for a fixed seed") {
  Scenario sc = find_scenario("A1");
  sc.spec.n = 2000;
  Sample s = generate(sc.spec).observed();
  MiOptions opts;
  opts.seed = 11;
  MmmEngine e1(s, sc.default_instruments, opts);
  MmmEngine e2(s, sc.default_instruments, opts);
  PsiPoint psi;
  psi.theta = VectorXd::Constant(1, 1.1);
  psi.sigma_eps = 2.2;
  const auto r1 = e1.test_point(psi);
  const auto r2 = e2.test_point(psi);
  CHECK(r1.q == r2.q);
  CHECK(r1.critical_value == r2.critical_value);
}

TEST_CASE("confidence set covers the truth on a small design") {
  Scenario sc = find_scenario("A1");
  sc.spec.n = 2000;
  Sample s = generate(sc.spec).observed();
  MiOptions opts;
  opts.seed = 21;
  opts.min_points = 30;
  ConfidenceSet cs =
      confidence_set(s, sc.default_instruments, 0.05, opts);
  REQUIRE(!cs.empty());
  CHECK(static_cast<int>(cs.accepted.size()) >= 30);
  CHECK(cs.points_tested >= static_cast<int>(cs.accepted.size()));
  const VectorXd lo = cs.lower_bounds(), hi = cs.upper_bounds();
  // truth: theta = 1, sigma_xi = 2
  CHECK(lo(0) <= 1.0);
  CHECK(hi(0) >= 1.0);
  CHECK(lo(1) <= 2.0);
  CHECK(hi(1) >= 2.0);
  // every accepted point passed its own test
  for (const auto& a : cs.accepted) CHECK(a.q <= a.critical_value);

  // identical options give an identical set
  ConfidenceSet cs2 =
      confidence_set(s, sc.default_instruments, 0.05, opts);
  REQUIRE(cs2.accepted.size() == cs.accepted.size());
  CHECK((cs2.lower_bounds() - lo).cwiseAbs().maxCoeff() == 0.0);
  CHECK((cs2.upper_bounds() - hi).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("returns bounds from the accepted set") {
  Scenario sc = find_scenario("A1");
  sc.spec.n = 2000;
  Sample s = generate(sc.spec).observed();
  MiOptions opts;
  opts.seed = 21;
  opts.min_points = 10;
  ConfidenceSet cs =
      confidence_set(s, sc.default_instruments, 0.05, opts);
  REQUIRE(!cs.empty());
  auto rds = mi_returns_bounds(cs, s, sc.default_instruments, {0.0, 1.0});
  CHECK(rds.size() == 2 * cs.accepted.size());
  CHECK(rds.front().kind == ReturnsKind::mi_bound);
  CHECK_THROWS_AS(
      mi_returns_bounds(cs, s, sc.default_instruments, {1.5}),
      std::invalid_argument);
}

}  // TEST_SUITE
