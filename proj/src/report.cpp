#include "pret/report.hpp"

#include "pret/kernels.hpp"
#include "pret/stat_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pret {

namespace kernels {

namespace {

inline double density_at(const ReturnsDistribution& rd, double t) {
  const int n = static_cast<int>(rd.location.size());
  double acc = 0.0;
  for (int i = 0; i < n; ++i)
    acc += normal_pdf((t - rd.location(i)) / rd.scale);
  return acc / (n * rd.scale);
}

}  // namespace

VectorXd pooled_density_serial(const ReturnsDistribution& rd,
                               const VectorXd& support) {
  VectorXd out(support.size());
  for (int j = 0; j < support.size(); ++j) out(j) = density_at(rd, support(j));
  return out;
}

VectorXd pooled_density_omp(const ReturnsDistribution& rd,
                            const VectorXd& support) {
  VectorXd out(support.size());
#pragma omp parallel for schedule(static)
  for (int j = 0; j < support.size(); ++j) out(j) = density_at(rd, support(j));
  return out;
}

}  // namespace kernels

VectorXd pooled_density(const ReturnsDistribution& rd,
                        const VectorXd& support) {
  if (support.size() < 50)
    throw std::invalid_argument("support needs at least 50 points");
  for (int j = 1; j < support.size(); ++j)
    if (!(support(j) > support(j - 1)))
      throw std::invalid_argument("support must be strictly ascending");
  if (!(rd.scale > 0.0)) throw std::invalid_argument("scale must be positive");
  return kernels::pooled_density_omp(rd, support);
}

VectorXd default_support(const std::vector<ReturnsDistribution>& rds,
                         int points) {
  if (rds.empty()) throw std::invalid_argument("no distributions");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& rd : rds) {
    lo = std::min(lo, rd.location.minCoeff() - 4.0 * rd.scale);
    hi = std::max(hi, rd.location.maxCoeff() + 4.0 * rd.scale);
  }
  return VectorXd::LinSpaced(points, lo, hi);
}

double ks_distance(const ReturnsDistribution& rd, const VectorXd& draws,
                   int eval_points) {
  const int n = static_cast<int>(draws.size());
  std::vector<double> sorted(draws.data(), draws.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const double lo = std::min(sorted.front(), rd.location.minCoeff() - 4 * rd.scale);
  const double hi = std::max(sorted.back(), rd.location.maxCoeff() + 4 * rd.scale);
  const VectorXd grid = VectorXd::LinSpaced(eval_points, lo, hi);
  VectorXd mix_cdf(eval_points);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < eval_points; ++j) {
    double acc = 0.0;
    for (int i = 0; i < rd.location.size(); ++i)
      acc += normal_cdf((grid(j) - rd.location(i)) / rd.scale);
    mix_cdf(j) = acc / rd.location.size();
  }
  double ks = 0.0;
  for (int j = 0; j < eval_points; ++j) {
    const auto up = std::upper_bound(sorted.begin(), sorted.end(), grid(j));
    const double ecdf = double(up - sorted.begin()) / n;
    ks = std::max(ks, std::abs(mix_cdf(j) - ecdf));
  }
  return ks;
}

EstimateTable render_table(const std::string& scenario,
                           const ScenarioTargets& targets,
                           const std::optional<ProbitFit>& probit,
                           const std::optional<CfFit>& cf,
                           const std::optional<ConfidenceSet>& cs, int n) {
  if (!probit && !cf && !cs)
    throw std::invalid_argument("need at least one fit");
  EstimateTable t;
  t.scenario = scenario;
  t.n = n;
  const int k = static_cast<int>(targets.theta_true.size());
  for (int j = 0; j < k; ++j) {
    EstimateRow row;
    row.param = j == 0 ? "Constant" : "x_" + std::to_string(j);
    row.target = targets.theta_true(j);
    if (probit) {
      row.probit = probit->theta(j);
      row.probit_se = probit->se_structural(j);
    }
    if (cf) {
      row.cf = cf->theta(j);
      row.cf_se = cf->se_mt(j);
    }
    if (cs && !cs->empty()) {
      row.mi_lo = cs->lower_bounds()(j);
      row.mi_hi = cs->upper_bounds()(j);
    }
    t.rows.push_back(row);
  }
  {
    EstimateRow row;
    row.param = "sigma";
    row.target = targets.sigma_true;
    if (probit) {
      row.probit = probit->sigma;
      row.probit_se = probit->se_structural(k);
    }
    t.rows.push_back(row);
  }
  {
    EstimateRow row;
    row.param = "sigma_zeta";
    row.target = targets.sigma_zeta_true;
    if (cf) {
      row.cf = cf->sigma_zeta;
      row.cf_se = cf->se_mt(k);
    }
    t.rows.push_back(row);
  }
  {
    EstimateRow row;
    row.param = "rho";
    row.target = targets.rho_true;
    if (cf) {
      row.cf = cf->rho;
      row.cf_se = cf->se_mt(k + 1);
    }
    t.rows.push_back(row);
  }
  {
    EstimateRow row;
    row.param = "sigma_eps";
    row.target = targets.sigma_eps_true;
    if (cs && !cs->empty()) {
      row.mi_lo = cs->lower_bounds()(k);
      row.mi_hi = cs->upper_bounds()(k);
    }
    t.rows.push_back(row);
  }
  return t;
}

namespace {

std::string fmt(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", *v);
  return buf;
}

}  // namespace

std::string table_to_csv(const EstimateTable& table) {
  std::ostringstream os;
  os << "param,target,probit,probit_se,cf,cf_se,mi_lo,mi_hi\n";
  for (const auto& r : table.rows) {
    os << r.param << ',' << fmt(r.target) << ',' << fmt(r.probit) << ','
       << fmt(r.probit_se) << ',' << fmt(r.cf) << ',' << fmt(r.cf_se) << ','
       << fmt(r.mi_lo) << ',' << fmt(r.mi_hi) << '\n';
  }
  return os.str();
}

std::string timing_report(const std::vector<TimedRun>& runs) {
  if (runs.empty()) throw std::invalid_argument("no runs");
  std::ostringstream os;
  os << "scenario,method,seconds\n";
  for (const auto& r : runs) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", r.seconds);
    os << r.scenario << ',' << r.method << ',' << buf << '\n';
  }
  return os.str();
}

void write_density_dat(const VectorXd& support, const VectorXd& density,
                       const std::string& path) {
  if (support.size() != density.size())
    throw std::invalid_argument("support/density size mismatch");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  for (int j = 0; j < support.size(); ++j) {
    char buf[80];
    std::snprintf(buf, sizeof buf, "%.10g %.10g\n", support(j), density(j));
    os << buf;
  }
}

std::pair<VectorXd, VectorXd> density_envelope(
    const std::vector<ReturnsDistribution>& family, const VectorXd& support) {
  if (family.empty()) throw std::invalid_argument("empty family");
  VectorXd lo = pooled_density(family.front(), support);
  VectorXd hi = lo;
  for (size_t i = 1; i < family.size(); ++i) {
    const VectorXd d = pooled_density(family[i], support);
    lo = lo.cwiseMin(d);
    hi = hi.cwiseMax(d);
  }
  return {lo, hi};
}

}  // namespace pret
