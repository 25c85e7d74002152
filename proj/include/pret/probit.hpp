#pragma once

#include "pret/model.hpp"

namespace pret {

struct FitOptions {
  int max_iter = 200;
  double grad_tol = 1e-8;
};

struct ProbitFit {
  VectorXd theta_star;
  double gamma_star = 0.0;
  VectorXd theta;              // theta_star / gamma_star
  double sigma = 0.0;          // 1 / gamma_star
  MatrixXd vcov_structural;    // delta method over (theta, sigma)
  VectorXd se_structural;      // sqrt of its diagonal
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  bool quasi_separated = false;
};

struct LoglikEval {
  double value;
  VectorXd gradient;  // over (theta_star, gamma_star)
  MatrixXd hessian;
};

// Log-likelihood of the scale-constrained probit with index
// X*theta_star - Price*gamma_star; analytic derivatives.
LoglikEval probit_loglik(const VectorXd& theta_star, double gamma_star,
                         const Sample& sample);

ProbitFit fit_probit(const Sample& sample, const FitOptions& options = {});

ReturnsDistribution probit_returns(const ProbitFit& fit, const Sample& sample);

}  // namespace pret
