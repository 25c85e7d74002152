#pragma once

#include "pret/model.hpp"
#include "pret/stat_kernels.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace pret {

// Full description of a simulated population. The joint covariance is over
// (z_1..z_p, u, nu, eps) in that order; extra covariates (beyond the
// constant) are drawn independently with the given variances and belong to
// both X and Z.
struct DgpSpec {
  std::string label;
  MatrixXd sigma_joint;             // (p+3) x (p+3)
  VectorXd beta;                    // constant first, one per X column
  VectorXd delta;                   // first-stage coefs on (1, z_1..z_p)
  std::vector<double> x_extra_vars; // variances of non-constant covariates
  int n = 10000;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  int p() const { return static_cast<int>(sigma_joint.rows()) - 3; }
  void validate() const;
};

// Population values each estimator is chasing, derived by covariance
// arithmetic from the spec.
struct ScenarioTargets {
  VectorXd theta_true;
  double sigma_true = 0;
  double rho_true = 0;
  double sigma_zeta_true = 0;
  double sigma_eps_true = 0;
  double sigma_xi_true = 0;
};

// Draws the population and applies the decision rule; the hidden block is
// populated for test oracles.
Sample generate(const DgpSpec& spec);

// instrument_subset holds indices into the excluded instruments z_1..z_p
// that the estimator will actually use; components left out fold into the
// effective first-stage residual.
ScenarioTargets analytic_targets(const DgpSpec& spec,
                                 const std::vector<int>& instrument_subset);

struct Scenario {
  DgpSpec spec;
  ScenarioTargets targets;
  std::vector<int> default_instruments;  // subset used for the targets
};

// The nine named scenarios: sim1, sim2, A1..A7.
std::vector<Scenario> builtin_scenarios();
Scenario find_scenario(const std::string& name);

// JSON scenario files: keys label, n, seed, beta, delta, sigma, x_extra.
DgpSpec load_dgp_json(const std::string& path);
void save_dgp_json(const DgpSpec& spec, const std::string& path);

}  // namespace pret
