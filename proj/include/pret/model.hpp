#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

namespace pret {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Structural parameters of the latent-variable model. The coefficient on
// the perceived price is fixed at -1; that restriction is what pins down
// the monetary scale, so it is not a field.
struct LatentModelParams {
  VectorXd theta;          // one per covariate, constant first
  double sigma = 1.0;      // sd of the composite latent error
  double rho = 0.0;        // control-function residual coefficient
  double sigma_zeta = 1.0; // sd of the residual after controlling for u_hat

  void validate() const;
};

// Latent diagnostics kept alongside simulated data; never visible to
// estimators.
struct HiddenBlock {
  VectorXd u;    // first-stage error
  VectorXd nu;   // price misperception
  VectorXd eps;  // idiosyncratic perceived-return component
  VectorXd pi;   // latent perceived return
};

struct Sample {
  int n = 0;
  VectorXd s;      // binary choice, entries in {0,1}
  VectorXd price;  // realized price
  MatrixXd x;      // covariates, first column constant
  MatrixXd z;      // instruments; x columns come first (X subset of Z)
  std::optional<HiddenBlock> hidden;

  int k() const { return static_cast<int>(x.cols()); }
  int m() const { return static_cast<int>(z.cols()); }
  // throws std::invalid_argument on any violated invariant
  void validate() const;
  // estimator-facing view: same data, hidden block stripped
  Sample observed() const;
};

enum class ReturnsKind { probit, control_function, mi_bound };

// Per-observation normal location with a common scale; the pooled mixture
// is the estimated perceived-returns distribution.
struct ReturnsDistribution {
  VectorXd location;
  double scale = 1.0;
  ReturnsKind kind = ReturnsKind::probit;
};

// X_i*theta - Price_i, plus u_hat*rho when a residual is supplied.
double latent_index(const LatentModelParams& params, const Sample& sample,
                    int row, std::optional<double> include_u = std::nullopt);

// Phi(index / sigma); uses sigma_zeta and the rho term when include_u given.
double selection_probability(const LatentModelParams& params,
                             const Sample& sample, int row,
                             std::optional<double> include_u = std::nullopt);

// CSV round trip. Header: s,price,x_1..x_k,z_1..z_m; the hidden block goes
// to a sibling "<stem>.hidden.csv" with header u,nu,eps,pi.
void write_sample_csv(const Sample& sample, const std::string& path);
Sample read_sample_csv(const std::string& path);

}  // namespace pret
