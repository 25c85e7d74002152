#include "doctest.h"

#include "pret/dgp.hpp"
#include "pret/probit.hpp"
#include "pret/stat_kernels.hpp"

#include <stdexcept>

using namespace pret;

namespace {

// Independent oracle: plain unconstrained probit of s on W = [X, -price],
// fit by Fisher-scoring IRLS written from scratch here.
VectorXd irls_probit(const Sample& s) {
  const int k = s.k();
  MatrixXd W(s.n, k + 1);
  W.leftCols(k) = s.x;
  W.col(k) = -s.price;
  VectorXd beta = VectorXd::Zero(k + 1);
  beta(0) = 0.1;
  beta(k) = 0.1;
  for (int it = 0; it < 200; ++it) {
    VectorXd wvec(s.n), zvec(s.n);
    for (int i = 0; i < s.n; ++i) {
      const double eta = W.row(i).dot(beta);
      const double p = std::min(std::max(normal_cdf(eta), 1e-12), 1 - 1e-12);
      const double d = normal_pdf(eta);
      wvec(i) = d * d / (p * (1 - p));
      zvec(i) = eta + (s.s(i) - p) / d;
    }
    const MatrixXd Ww = W.array().colwise() * wvec.array();
    VectorXd next = (Ww.transpose() * W).ldlt().solve(Ww.transpose() * zvec);
    const double step = (next - beta).cwiseAbs().maxCoeff();
    beta = next;
    if (step < 1e-12) break;
  }
  return beta;
}

double loglik_at(const VectorXd& theta_star, double gamma_star,
                 const Sample& s) {
  return probit_loglik(theta_star, gamma_star, s).value;
}

}  // namespace

TEST_SUITE("probit") {

TEST_CASE("loglik gradient matches central differences") {
  Scenario sc = find_scenario("sim1");
  sc.spec.n = 400;
  Sample s = generate(sc.spec).observed();
  RngStream rng(5, 0);
  for (int trial = 0; trial < 100; ++trial) {
    VectorXd ts(1);
    ts(0) = rng.next_normal();
    const double gs = 0.2 + 1.5 * rng.next_uniform();
    const LoglikEval ev = probit_loglik(ts, gs, s);
    const double h = 1e-5;
    VectorXd tp = ts, tm = ts;
    tp(0) += h;
    tm(0) -= h;
    const double fd_t = (loglik_at(tp, gs, s) - loglik_at(tm, gs, s)) / (2 * h);
    const double fd_g =
        (loglik_at(ts, gs + h, s) - loglik_at(ts, gs - h, s)) / (2 * h);
    const double scale = std::max(1.0, std::abs(fd_t));
    CHECK(std::abs(ev.gradient(0) - fd_t) / scale < 1e-5);
    CHECK(std::abs(ev.gradient(1) - fd_g) / std::max(1.0, std::abs(fd_g)) <
          1e-5);
  }
}

TEST_CASE("single observation likelihood") {
  Sample s;
  s.n = 1;
  s.s = VectorXd::Zero(1);
  s.price = VectorXd::Zero(1);
  s.x = MatrixXd::Ones(1, 1);
  s.z = s.x;
  VectorXd ts = VectorXd::Zero(1);
  CHECK(probit_loglik(ts, 1.0, s).value ==
        doctest::Approx(std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("matches an unconstrained probit fit independently coded") {
  Scenario sc = find_scenario("sim1");
  sc.spec.n = 4000;
  Sample s = generate(sc.spec).observed();
  ProbitFit fit = fit_probit(s);
  REQUIRE(fit.converged);
  const VectorXd oracle = irls_probit(s);
  CHECK(std::abs(fit.theta_star(0) - oracle(0)) < 1e-6);
  CHECK(std::abs(fit.gamma_star - oracle(1)) < 1e-6);
  // and the optimum dominates the truth
  VectorXd ts_true(1);
  ts_true << 0.5;  // theta=1, sigma=2
  CHECK(fit.loglik >= loglik_at(ts_true, 0.5, s) - 1e-9);
}

TEST_CASE("consistency on the exogenous design") {
  Scenario sc = find_scenario("sim1");
  sc.spec.n = 200000;
  Sample s = generate(sc.spec).observed();
  ProbitFit fit = fit_probit(s);
  REQUIRE(fit.converged);
  CHECK(std::abs(fit.theta(0) - 1.0) < 0.03);
  CHECK(std::abs(fit.sigma - 2.0) < 0.06);
  CHECK(fit.se_structural.minCoeff() > 0.0);
  CHECK(fit.se_structural(0) < 0.05);
}

TEST_CASE("monetary-unit equivariance") {
  Scenario sc = find_scenario("sim1");
  sc.spec.n = 3000;
  Sample s = generate(sc.spec).observed();
  ProbitFit a = fit_probit(s);
  Sample s2 = s;
  const double c = 7.5;
  s2.price *= c;
  ProbitFit b = fit_probit(s2);
  // rescaling the price rescales theta and sigma by the same factor
  CHECK(std::abs(b.theta(0) - c * a.theta(0)) < 1e-5 * c);
  CHECK(std::abs(b.sigma - c * a.sigma) < 1e-5 * c);
}

TEST_CASE("returns distribution") {
  Scenario sc = find_scenario("sim1");
  sc.spec.n = 1000;
  Sample s = generate(sc.spec).observed();
  ProbitFit fit = fit_probit(s);
  ReturnsDistribution rd = probit_returns(fit, s);
  CHECK(rd.kind == ReturnsKind::probit);
  CHECK(rd.location.size() == s.n);
  CHECK(rd.scale == doctest::Approx(fit.sigma));
  for (int i = 0; i < 5; ++i)
    CHECK(rd.location(i) ==
          doctest::Approx(s.x.row(i).dot(fit.theta) - s.price(i))
              .epsilon(1e-12));
}

TEST_CASE("degenerate price rejected") {
  Sample s;
  s.n = 20;
  s.s = VectorXd::Zero(20);
  for (int i = 0; i < 10; ++i) s.s(i) = 1.0;
  s.price = VectorXd::Ones(20);
  s.x = MatrixXd::Ones(20, 1);
  s.z = s.x;
  CHECK_THROWS_AS(fit_probit(s), std::invalid_argument);
}

}  // TEST_SUITE
