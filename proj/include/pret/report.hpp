#pragma once

#include "pret/control_function.hpp"
#include "pret/dgp.hpp"
#include "pret/model.hpp"
#include "pret/moment_inequalities.hpp"
#include "pret/probit.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pret {

struct EstimateRow {
  std::string param;
  std::optional<double> target;
  std::optional<double> probit, probit_se;
  std::optional<double> cf, cf_se;
  std::optional<double> mi_lo, mi_hi;
};

struct EstimateTable {
  std::string scenario;
  int n = 0;
  std::vector<EstimateRow> rows;
};

// Pooled mixture density over an ascending support grid of >= 50 points.
VectorXd pooled_density(const ReturnsDistribution& rd, const VectorXd& support);

// Default support: [min loc - 4*scale, max loc + 4*scale], 512 points.
VectorXd default_support(const std::vector<ReturnsDistribution>& rds,
                         int points = 512);

// Kolmogorov-Smirnov distance between the pooled mixture CDF and the
// empirical CDF of draws, evaluated on an even grid over the pooled range.
double ks_distance(const ReturnsDistribution& rd, const VectorXd& draws,
                   int eval_points = 2001);

EstimateTable render_table(const std::string& scenario,
                           const ScenarioTargets& targets,
                           const std::optional<ProbitFit>& probit,
                           const std::optional<CfFit>& cf,
                           const std::optional<ConfidenceSet>& cs, int n);

// Byte-stable CSV with columns param,target,probit,probit_se,cf,cf_se,mi_lo,mi_hi.
std::string table_to_csv(const EstimateTable& table);

struct TimedRun {
  std::string scenario;
  std::string method;
  double seconds = 0.0;
};
std::string timing_report(const std::vector<TimedRun>& runs);

// gnuplot-style two-column density file
void write_density_dat(const VectorXd& support, const VectorXd& density,
                       const std::string& path);

// Per-support-point min/max envelope across a family of densities.
std::pair<VectorXd, VectorXd> density_envelope(
    const std::vector<ReturnsDistribution>& family, const VectorXd& support);

}  // namespace pret
