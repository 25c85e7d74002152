#pragma once

// Internal Newton machinery shared by the probit and control-function
// estimators. Both are index likelihoods s*logPhi(w'psi) +
// (1-s)*log(1-Phi(w'psi)); the scale coefficient is kept positive by
// optimizing its log.

#include "pret/stat_kernels.hpp"

#include <Eigen/Dense>

namespace pret::detail {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct LikEval {
  double value;
  VectorXd grad;   // natural parameters
  MatrixXd hess;   // natural parameters
};

// dl/dt and d2l/dt2 for one observation at index t
inline void score_terms(double t, double s, double& g, double& h) {
  if (s == 1.0) {
    g = inverse_mills(t, Tail::lower);
    h = -g * (g + t);
  } else {
    const double gu = inverse_mills(t, Tail::upper);
    g = -gu;
    h = -gu * (gu - t);
  }
}

inline LikEval loglik_eval(const MatrixXd& w, const VectorXd& s,
                           const VectorXd& psi) {
  const int n = static_cast<int>(w.rows());
  const int q = static_cast<int>(w.cols());
  LikEval out{0.0, VectorXd::Zero(q), MatrixXd::Zero(q, q)};
  const VectorXd t = w * psi;
  for (int i = 0; i < n; ++i) {
    out.value += (s(i) == 1.0) ? log_normal_cdf(t(i)) : log_normal_cdf(-t(i));
    double g, h;
    score_terms(t(i), s(i), g, h);
    out.grad += g * w.row(i).transpose();
    out.hess += h * (w.row(i).transpose() * w.row(i));
  }
  return out;
}

struct MleResult {
  VectorXd psi;
  double loglik = 0.0;
  MatrixXd observed_info;  // -hessian at the optimum, natural parameters
  int iterations = 0;
  bool converged = false;
};

// Damped Newton on (psi with psi[gamma_index] log-transformed).
inline MleResult maximize(const MatrixXd& w, const VectorXd& s, VectorXd psi0,
                          int gamma_index, int max_iter = 200,
                          double tol = 1e-8) {
  const int q = static_cast<int>(psi0.cols() == 1 ? psi0.size() : 0);
  VectorXd eta = psi0;
  eta(gamma_index) = std::log(psi0(gamma_index));

  auto to_psi = [&](const VectorXd& e) {
    VectorXd p = e;
    p(gamma_index) = std::exp(e(gamma_index));
    return p;
  };
  auto eval_eta = [&](const VectorXd& e) {
    const VectorXd psi = to_psi(e);
    LikEval le = loglik_eval(w, s, psi);
    const double gam = psi(gamma_index);
    // chain rule for the log-parameterized coordinate
    LikEval te = le;
    te.grad(gamma_index) *= gam;
    te.hess.row(gamma_index) *= gam;
    te.hess.col(gamma_index) *= gam;
    te.hess(gamma_index, gamma_index) += le.grad(gamma_index) * gam;
    return std::pair<LikEval, LikEval>(le, te);  // (natural, transformed)
  };

  MleResult res;
  auto [nat, tr] = eval_eta(eta);
  double value = tr.value;
  int it = 0;
  for (; it < max_iter; ++it) {
    if (nat.grad.cwiseAbs().maxCoeff() <= tol) {
      res.converged = true;
      break;
    }
    VectorXd dir;
    Eigen::LDLT<MatrixXd> ldlt(-tr.hess);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      dir = ldlt.solve(tr.grad);
    } else {
      dir = tr.grad / (1.0 + tr.grad.norm());
    }
    double step = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 60; ++ls) {
      VectorXd cand = eta + step * dir;
      auto [cn, ct] = eval_eta(cand);
      if (std::isfinite(ct.value) &&
          ct.value > value - 1e-12 * (1.0 + std::abs(value))) {
        eta = cand;
        nat = cn;
        tr = ct;
        value = ct.value;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  res.psi = to_psi(eta);
  res.loglik = value;
  res.observed_info = -nat.hess;
  res.iterations = it;
  (void)q;
  return res;
}

}  // namespace pret::detail
