#include "pret/probit.hpp"

#include "binary_mle.hpp"

#include <cmath>
#include <stdexcept>

namespace pret {

namespace {

MatrixXd probit_design(const Sample& sample) {
  MatrixXd w(sample.n, sample.k() + 1);
  w.leftCols(sample.k()) = sample.x;
  w.col(sample.k()) = -sample.price;
  return w;
}

}  // namespace

LoglikEval probit_loglik(const VectorXd& theta_star, double gamma_star,
                         const Sample& sample) {
  if (!(gamma_star > 0.0))
    throw std::invalid_argument("gamma_star must be positive");
  VectorXd psi(theta_star.size() + 1);
  psi << theta_star, gamma_star;
  auto le = detail::loglik_eval(probit_design(sample), sample.s, psi);
  return {le.value, le.grad, le.hess};
}

namespace {

// OLS linear-probability start, per the shared initialization policy
struct StartValues {
  VectorXd theta_star;
  double gamma_star;
};

StartValues lpm_start(const Sample& sample) {
  const int k = sample.k();
  MatrixXd d(sample.n, k + 1);
  d.leftCols(k) = sample.x;
  d.col(k) = sample.price;
  VectorXd b = d.colPivHouseholderQr().solve(sample.s);
  const double sd_price =
      std::sqrt((sample.price.array() - sample.price.mean()).square().mean());
  StartValues sv;
  sv.theta_star = 2.5 * b.head(k);
  sv.gamma_star =
      std::clamp(2.5 * std::abs(b(k)) / sd_price, 1e-3, 1e3);
  return sv;
}

}  // namespace

ProbitFit fit_probit(const Sample& sample, const FitOptions& options) {
  sample.validate();
  const int k = sample.k();
  const double price_var =
      (sample.price.array() - sample.price.mean()).square().mean();
  if (price_var <= 0.0)
    throw std::invalid_argument(
        "price has zero variance: scale parameter not identified");

  const StartValues sv = lpm_start(sample);
  VectorXd psi0(k + 1);
  psi0 << sv.theta_star, sv.gamma_star;
  auto mle = detail::maximize(probit_design(sample), sample.s, psi0, k,
                              options.max_iter, options.grad_tol);

  ProbitFit fit;
  fit.theta_star = mle.psi.head(k);
  fit.gamma_star = mle.psi(k);
  fit.theta = fit.theta_star / fit.gamma_star;
  fit.sigma = 1.0 / fit.gamma_star;
  fit.loglik = mle.loglik;
  fit.iterations = mle.iterations;
  fit.converged = mle.converged;
  fit.quasi_separated = fit.gamma_star > 1e4 * sv.gamma_star;

  // delta method: (theta, sigma) = (theta*/gamma*, 1/gamma*)
  const MatrixXd vstar = mle.observed_info.inverse();
  MatrixXd jac = MatrixXd::Zero(k + 1, k + 1);
  const double g = fit.gamma_star;
  for (int j = 0; j < k; ++j) {
    jac(j, j) = 1.0 / g;
    jac(j, k) = -fit.theta_star(j) / (g * g);
  }
  jac(k, k) = -1.0 / (g * g);
  fit.vcov_structural = jac * vstar * jac.transpose();
  fit.vcov_structural = 0.5 * (fit.vcov_structural +
                               fit.vcov_structural.transpose()).eval();
  fit.se_structural = fit.vcov_structural.diagonal().cwiseMax(0.0).cwiseSqrt();
  return fit;
}

ReturnsDistribution probit_returns(const ProbitFit& fit, const Sample& sample) {
  if (!fit.converged)
    throw std::runtime_error("probit fit did not converge");
  ReturnsDistribution rd;
  rd.location = sample.x * fit.theta - sample.price;
  rd.scale = fit.sigma;
  rd.kind = ReturnsKind::probit;
  return rd;
}

}  // namespace pret
