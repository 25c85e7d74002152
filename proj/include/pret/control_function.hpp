#pragma once

#include "pret/model.hpp"
#include "pret/probit.hpp"

#include <vector>

namespace pret {

struct FirstStageFit {
  VectorXd delta_hat;            // coefs on [X, selected excluded instruments]
  VectorXd residuals;            // u_hat
  MatrixXd vcov_delta;           // homoskedastic OLS form
  double sigma_u2 = 0.0;         // residual variance (SSR / (n - q))
  std::vector<int> instrument_columns;  // excluded z columns actually used
  double f_excluded = 0.0;       // first-stage F on the excluded instruments
  bool weak_instruments = false; // F below 10, reported not fatal
};

struct CfFit {
  FirstStageFit first_stage;
  VectorXd theta;
  double rho = 0.0;
  double sigma_zeta = 0.0;
  VectorXd theta_star;           // raw (theta*_zeta, gamma*_zeta, rho*_zeta)
  double gamma_star = 0.0;
  double rho_star = 0.0;
  MatrixXd vcov_mt;              // estimated-regressor corrected, structural
  MatrixXd vcov_naive;           // uncorrected, structural
  VectorXd se_mt;
  VectorXd se_naive;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  bool quasi_separated = false;
  double rho_odds = 0.0;         // rho / (1 - rho)
  bool rho_odds_negative = false;
};

// OLS of price on [X, chosen excluded instruments]; instrument_columns are
// indices into Sample.z past the X block.
FirstStageFit fit_first_stage(const Sample& sample,
                              const std::vector<int>& instrument_columns);

// Second-stage likelihood with index X*theta* - Price*gamma* + u_hat*rho*.
LoglikEval cf_loglik(const VectorXd& theta_star, double gamma_star,
                     double rho_star, const Sample& sample,
                     const VectorXd& u_hat);

CfFit fit_cf(const Sample& sample, const std::vector<int>& instrument_columns,
             const FitOptions& options = {});

// Two-step covariance correction:
// V = V2 + V2 (C V1 C' - R V1 C' - C V1 R') V2, symmetrized.
// info2 is the total second-stage observed information, C the total cross
// Hessian, R the total score cross-product, v1 the first-stage covariance.
MatrixXd mt_correct(const MatrixXd& info2, const MatrixXd& v1,
                    const MatrixXd& C, const MatrixXd& R);

ReturnsDistribution cf_returns(const CfFit& fit, const Sample& sample);

// all excluded instrument columns (those past the X block)
std::vector<int> all_excluded_instruments(const Sample& sample);

}  // namespace pret
