#pragma once

#include "pret/control_function.hpp"
#include "pret/model.hpp"
#include "pret/stat_kernels.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pret {

// A candidate parameter vector for the inequality test. sigma_eps houses
// the sd of the idiosyncratic perceived-return component (or its
// residual-form counterpart when endogeneity is controlled for).
struct PsiPoint {
  VectorXd theta;
  double sigma_eps = 1.0;

  int dim() const { return static_cast<int>(theta.size()) + 1; }
  VectorXd as_vector() const;
  static PsiPoint from_vector(const VectorXd& v);
};

struct MomentSet {
  MatrixXd values;                  // n x L per-observation moments
  VectorXd means;
  VectorXd sds;                     // population form, 1/N
  std::vector<std::string> labels;  // e.g. "rp1:const", "ob2:z_2>med"
  std::vector<int> dropped;         // zero-variance columns removed
  bool saturated = false;           // any odds ratio hit the cap
  int L() const { return static_cast<int>(means.size()); }
};

// Per-observation revealed-preference moments at index
// a = X*theta/sigma - Price/sigma.
std::pair<double, double> rp_moments(const PsiPoint& psi, const Sample& sample,
                                     int row);
// Odds-based moments; ratios capped at 1e300 with a saturation flag.
std::pair<double, double> ob_moments(const PsiPoint& psi, const Sample& sample,
                                     int row);

// Unconditional moments: each of the four base moments times instrument
// functions {1} plus above/below-median indicators per excluded column.
MomentSet build_unconditional_moments(const PsiPoint& psi, const Sample& sample,
                                      const std::vector<int>& instrument_columns);

// Sum of squared scaled inequality violations.
double q_statistic(const MomentSet& ms, int n);

// Simulated critical value (Andrews-Soares style): draws chi_r ~ N(0, I_L),
// keeps moments within sqrt(ln n) of binding, returns the (1-alpha)
// empirical quantile of the simulated criterion.
double as_critical_value(const MomentSet& ms, int n, double alpha, int draws,
                         RngStream& rng);

struct MiOptions {
  double alpha = 0.05;
  int draws = 1000;
  int min_points = 50;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  int grid_points_per_dim = 10;
  double se_multiplier = 20.0;
  int nm_max_iter = 500;
  int max_refinements = 8;
};

struct AcceptedPoint {
  PsiPoint psi;
  double q = 0.0;
  double critical_value = 0.0;
};

struct ConfidenceSet {
  std::vector<AcceptedPoint> accepted;
  std::vector<PsiPoint> rejected_boundary;
  VectorXd grid_step;
  double alpha = 0.05;
  double runtime_seconds = 0.0;
  int points_tested = 0;
  std::vector<std::string> warnings;
  // per-coordinate bounding box of the accepted set
  VectorXd lower_bounds() const;
  VectorXd upper_bounds() const;
  bool empty() const { return accepted.empty(); }
};

// Shares one draw matrix across every tested point so results are
// deterministic under any evaluation schedule.
class MmmEngine {
 public:
  MmmEngine(const Sample& sample, std::vector<int> instrument_columns,
            const MiOptions& options);
  struct PointTest {
    double q;
    double critical_value;
    bool accepted;
  };
  PointTest test_point(const PsiPoint& psi) const;
  double q_only(const PsiPoint& psi) const;
  const MiOptions& options() const { return opts_; }

 private:
  const Sample& sample_;
  std::vector<int> cols_;
  MiOptions opts_;
  MatrixXd chi_;  // draws x L_max common random numbers
};

// Appendix-style adaptive grid search around the control-function start.
ConfidenceSet confidence_set(const Sample& sample,
                             const std::vector<int>& instrument_columns,
                             double alpha, const MiOptions& options);

// phi-indexed perceived-returns bounds for each accepted point: location
// uses phi*Price + (1-phi)*E[Price|Z] in place of the perceived price.
std::vector<ReturnsDistribution> mi_returns_bounds(
    const ConfidenceSet& cs, const Sample& sample,
    const std::vector<int>& instrument_columns,
    const std::vector<double>& phi_grid);

}  // namespace pret
