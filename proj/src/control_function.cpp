#include "pret/control_function.hpp"

#include "binary_mle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pret {

std::vector<int> all_excluded_instruments(const Sample& sample) {
  std::vector<int> cols;
  for (int j = 0; j < sample.m() - sample.k(); ++j) cols.push_back(j);
  return cols;
}

namespace {

MatrixXd selected_design(const Sample& sample,
                         const std::vector<int>& instrument_columns) {
  const int k = sample.k();
  MatrixXd z(sample.n, k + instrument_columns.size());
  z.leftCols(k) = sample.x;
  for (size_t j = 0; j < instrument_columns.size(); ++j) {
    const int c = instrument_columns[j];
    if (c < 0 || c >= sample.m() - k)
      throw std::invalid_argument("instrument column out of range");
    z.col(k + j) = sample.z.col(k + c);
  }
  return z;
}

double ssr_of(const MatrixXd& d, const VectorXd& y) {
  VectorXd b = d.colPivHouseholderQr().solve(y);
  return (y - d * b).squaredNorm();
}

}  // namespace

FirstStageFit fit_first_stage(const Sample& sample,
                              const std::vector<int>& instrument_columns) {
  sample.validate();
  const MatrixXd z = selected_design(sample, instrument_columns);
  const int q = static_cast<int>(z.cols());
  Eigen::ColPivHouseholderQR<MatrixXd> qr(z);
  if (qr.rank() < q) {
    // name the offending columns so the caller can fix the selection
    std::string msg = "first-stage design rank deficient; check columns:";
    for (int c : instrument_columns) msg += " z_" + std::to_string(c + 1);
    throw std::runtime_error(msg);
  }
  FirstStageFit fs;
  fs.instrument_columns = instrument_columns;
  fs.delta_hat = qr.solve(sample.price);
  fs.residuals = sample.price - z * fs.delta_hat;
  const double ssr = fs.residuals.squaredNorm();
  fs.sigma_u2 = ssr / (sample.n - q);
  fs.vcov_delta = fs.sigma_u2 * (z.transpose() * z).inverse();

  const int r = static_cast<int>(instrument_columns.size());
  if (r > 0) {
    const double ssr_restricted = ssr_of(sample.x, sample.price);
    fs.f_excluded = ((ssr_restricted - ssr) / r) / (ssr / (sample.n - q));
    fs.weak_instruments = fs.f_excluded < 10.0;
  }
  return fs;
}

LoglikEval cf_loglik(const VectorXd& theta_star, double gamma_star,
                     double rho_star, const Sample& sample,
                     const VectorXd& u_hat) {
  if (!(gamma_star > 0.0))
    throw std::invalid_argument("gamma_star must be positive");
  const int k = sample.k();
  MatrixXd w(sample.n, k + 2);
  w.leftCols(k) = sample.x;
  w.col(k) = -sample.price;
  w.col(k + 1) = u_hat;
  VectorXd psi(k + 2);
  psi << theta_star, gamma_star, rho_star;
  auto le = detail::loglik_eval(w, sample.s, psi);
  return {le.value, le.grad, le.hess};
}

MatrixXd mt_correct(const MatrixXd& info2, const MatrixXd& v1,
                    const MatrixXd& C, const MatrixXd& R) {
  Eigen::FullPivLU<MatrixXd> lu(info2);
  if (!lu.isInvertible())
    throw std::runtime_error("second-stage information is singular");
  const MatrixXd v2 = lu.inverse();
  const MatrixXd adj = C * v1 * C.transpose() - R * v1 * C.transpose() -
                       C * v1 * R.transpose();
  MatrixXd v = v2 + v2 * adj * v2;
  return 0.5 * (v + v.transpose());
}

CfFit fit_cf(const Sample& sample, const std::vector<int>& instrument_columns,
             const FitOptions& options) {
  CfFit fit;
  fit.first_stage = fit_first_stage(sample, instrument_columns);
  const VectorXd& uh = fit.first_stage.residuals;
  const double var_u = (uh.array() - uh.mean()).square().mean();
  if (var_u <= 1e-12)
    throw std::runtime_error(
        "first-stage residuals are degenerate: rho not identified");

  const int k = sample.k();
  MatrixXd w(sample.n, k + 2);
  w.leftCols(k) = sample.x;
  w.col(k) = -sample.price;
  w.col(k + 1) = uh;

  // warm start at the constrained-probit optimum with rho* = 0; the plain
  // linear-probability start occasionally sends Newton into the flat
  // small-gamma region on endogenous designs
  const ProbitFit warm = fit_probit(sample, options);
  VectorXd psi0(k + 2);
  psi0.head(k) = warm.theta_star;
  psi0(k) = warm.gamma_star;
  psi0(k + 1) = 0.0;
  const double gamma_start = psi0(k);

  auto mle = detail::maximize(w, sample.s, psi0, k, options.max_iter,
                              options.grad_tol);
  fit.theta_star = mle.psi.head(k);
  fit.gamma_star = mle.psi(k);
  fit.rho_star = mle.psi(k + 1);
  fit.theta = fit.theta_star / fit.gamma_star;
  fit.sigma_zeta = 1.0 / fit.gamma_star;
  fit.rho = fit.rho_star / fit.gamma_star;
  fit.loglik = mle.loglik;
  fit.iterations = mle.iterations;
  fit.converged = mle.converged;
  fit.quasi_separated = fit.gamma_star > 1e4 * gamma_start;
  fit.rho_odds = fit.rho / (1.0 - fit.rho);
  fit.rho_odds_negative = fit.rho_odds < 0.0;

  // two-step covariance pieces, all at the fitted parameters
  const MatrixXd zsel = selected_design(sample, instrument_columns);
  const int q1 = static_cast<int>(zsel.cols());
  const int q2 = k + 2;
  const VectorXd t = w * mle.psi;
  MatrixXd C = MatrixXd::Zero(q2, q1);
  MatrixXd R = MatrixXd::Zero(q2, q1);
  for (int i = 0; i < sample.n; ++i) {
    double g, h;
    detail::score_terms(t(i), sample.s(i), g, h);
    const VectorXd wi = w.row(i).transpose();
    const VectorXd zi = zsel.row(i).transpose();
    // index and the u_hat regressor both depend on delta
    C.noalias() += -fit.rho_star * h * (wi * zi.transpose());
    C.row(k + 1).noalias() += -g * zi.transpose();
    R.noalias() += (g * wi) * (zi * uh(i) / fit.first_stage.sigma_u2).transpose();
  }
  const MatrixXd v_nat_naive = mle.observed_info.inverse();
  const MatrixXd v_nat_mt =
      mt_correct(mle.observed_info, fit.first_stage.vcov_delta, C, R);

  // delta method to (theta, sigma_zeta, rho)
  MatrixXd jac = MatrixXd::Zero(q2, q2);
  const double gam = fit.gamma_star;
  for (int j = 0; j < k; ++j) {
    jac(j, j) = 1.0 / gam;
    jac(j, k) = -fit.theta_star(j) / (gam * gam);
  }
  jac(k, k) = -1.0 / (gam * gam);                 // sigma_zeta
  jac(k + 1, k + 1) = 1.0 / gam;                  // rho
  jac(k + 1, k) = -fit.rho_star / (gam * gam);
  fit.vcov_naive = (jac * v_nat_naive * jac.transpose()).eval();
  fit.vcov_naive = 0.5 * (fit.vcov_naive + fit.vcov_naive.transpose()).eval();
  fit.vcov_mt = (jac * v_nat_mt * jac.transpose()).eval();
  fit.vcov_mt = 0.5 * (fit.vcov_mt + fit.vcov_mt.transpose()).eval();
  fit.se_naive = fit.vcov_naive.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.se_mt = fit.vcov_mt.diagonal().cwiseMax(0.0).cwiseSqrt();
  return fit;
}

ReturnsDistribution cf_returns(const CfFit& fit, const Sample& sample) {
  if (!fit.converged)
    throw std::runtime_error("control-function fit did not converge");
  ReturnsDistribution rd;
  rd.location = sample.x * fit.theta - sample.price +
                fit.rho * fit.first_stage.residuals;
  rd.scale = fit.sigma_zeta;
  rd.kind = ReturnsKind::control_function;
  return rd;
}

}  // namespace pret
