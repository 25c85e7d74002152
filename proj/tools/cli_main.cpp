// Command-line front end: simulate, estimate, reproduce, sweep.

#include "pret/control_function.hpp"
#include "pret/dgp.hpp"
#include "pret/model.hpp"
#include "pret/moment_inequalities.hpp"
#include "pret/probit.hpp"
#include "pret/report.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pret;

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::vector<int> parse_instruments(const std::string& arg, const Sample& s) {
  if (arg.empty() || arg == "all") return all_excluded_instruments(s);
  std::vector<int> out;
  std::stringstream ss(arg);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

json vec_to_json(const VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json probit_to_json(const ProbitFit& f) {
  return {{"theta", vec_to_json(f.theta)},
          {"sigma", f.sigma},
          {"se", vec_to_json(f.se_structural)},
          {"loglik", f.loglik},
          {"iterations", f.iterations},
          {"converged", f.converged},
          {"quasi_separated", f.quasi_separated}};
}

json cf_to_json(const CfFit& f) {
  return {{"theta", vec_to_json(f.theta)},
          {"sigma_zeta", f.sigma_zeta},
          {"rho", f.rho},
          {"se", vec_to_json(f.se_mt)},
          {"se_naive", vec_to_json(f.se_naive)},
          {"first_stage_f", f.first_stage.f_excluded},
          {"weak_instruments", f.first_stage.weak_instruments},
          {"loglik", f.loglik},
          {"iterations", f.iterations},
          {"converged", f.converged},
          {"rho_odds", f.rho_odds}};
}

json cs_to_json(const ConfidenceSet& cs) {
  json j = {{"alpha", cs.alpha},
            {"points_tested", cs.points_tested},
            {"accepted_count", cs.accepted.size()},
            {"runtime_seconds", cs.runtime_seconds},
            {"warnings", cs.warnings},
            {"empty", cs.empty()}};
  if (!cs.empty()) {
    j["lower"] = vec_to_json(cs.lower_bounds());
    j["upper"] = vec_to_json(cs.upper_bounds());
  }
  return j;
}

void write_json(const json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << j.dump(2) << "\n";
}

Sample load_or_generate(const std::string& data, const std::string& scenario,
                        const std::string& config, int n, long long seed,
                        std::vector<int>* default_cols) {
  if (!data.empty()) return read_sample_csv(data);
  DgpSpec spec;
  if (!config.empty()) {
    spec = load_dgp_json(config);
  } else {
    Scenario sc = find_scenario(scenario);
    spec = sc.spec;
    if (default_cols) *default_cols = sc.default_instruments;
  }
  if (n > 0) spec.n = n;
  if (seed >= 0) spec.seed = static_cast<std::uint64_t>(seed);
  return generate(spec);
}

int run_simulate(const std::string& scenario, const std::string& config,
                 int n, long long seed, const std::string& out_dir) {
  DgpSpec spec = config.empty() ? find_scenario(scenario).spec
                                : load_dgp_json(config);
  if (n > 0) spec.n = n;
  if (seed >= 0) spec.seed = static_cast<std::uint64_t>(seed);
  Sample s = generate(spec);
  fs::create_directories(out_dir);
  const std::string csv = (fs::path(out_dir) / (spec.label + ".csv")).string();
  write_sample_csv(s, csv);
  save_dgp_json(spec, (fs::path(out_dir) / (spec.label + ".dgp.json")).string());
  json j = {{"scenario", spec.label}, {"n", s.n}, {"data", csv},
            {"selected_share", s.s.mean()}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_estimate(const std::string& method, const std::string& data,
                 const std::string& scenario, const std::string& config,
                 int n, long long seed, const std::string& instruments,
                 double alpha, int min_points, int draws,
                 const std::string& out) {
  std::vector<int> cols;
  Sample s = load_or_generate(data, scenario, config, n, seed, &cols);
  s = s.observed();
  if (!instruments.empty()) cols = parse_instruments(instruments, s);
  if (cols.empty()) cols = all_excluded_instruments(s);

  json j = {{"method", method}, {"n", s.n}};
  const double t0 = now_seconds();
  if (method == "probit") {
    j["fit"] = probit_to_json(fit_probit(s));
  } else if (method == "cf") {
    j["fit"] = cf_to_json(fit_cf(s, cols));
    j["instruments"] = cols;
  } else if (method == "mi") {
    MiOptions opts;
    opts.alpha = alpha;
    opts.min_points = min_points;
    opts.draws = draws;
    if (seed >= 0) opts.seed = static_cast<std::uint64_t>(seed);
    j["fit"] = cs_to_json(confidence_set(s, cols, alpha, opts));
    j["instruments"] = cols;
  } else {
    throw std::invalid_argument("unknown method " + method);
  }
  j["seconds"] = now_seconds() - t0;
  write_json(j, out);
  return 0;
}

struct Tolerances {
  double theta = 0.1, sigma = 0.2, rho = 0.08, sigma_zeta = 0.25;
  std::vector<std::string> probit_consistent;
};

Tolerances load_tolerances(const std::string& path) {
  Tolerances t;
  std::ifstream is(path);
  if (!is) return t;  // defaults if the file is missing
  json j = json::parse(is);
  t.theta = j.value("theta", t.theta);
  t.sigma = j.value("sigma", t.sigma);
  t.rho = j.value("rho", t.rho);
  t.sigma_zeta = j.value("sigma_zeta", t.sigma_zeta);
  if (j.contains("probit_consistent_scenarios"))
    t.probit_consistent =
        j["probit_consistent_scenarios"].get<std::vector<std::string>>();
  return t;
}

int run_reproduce(const std::string& table, int n, long long seed,
                  const std::string& out_dir, bool with_mi,
                  const std::string& tol_path) {
  std::string name = table;
  if (table == "1") name = "sim1";
  if (table == "2") name = "sim2";
  Scenario sc = find_scenario(name);
  if (n > 0) sc.spec.n = n;
  if (seed >= 0) sc.spec.seed = static_cast<std::uint64_t>(seed);
  Sample s = generate(sc.spec);
  ScenarioTargets targets = analytic_targets(sc.spec, sc.default_instruments);
  const Sample obs = s.observed();

  std::vector<TimedRun> timings;
  double t0 = now_seconds();
  ProbitFit pf = fit_probit(obs);
  timings.push_back({name, "probit", now_seconds() - t0});
  t0 = now_seconds();
  CfFit cf = fit_cf(obs, sc.default_instruments);
  timings.push_back({name, "cf", now_seconds() - t0});

  std::optional<ConfidenceSet> cs;
  if (with_mi) {
    MiOptions opts;
    opts.seed = sc.spec.seed;
    t0 = now_seconds();
    cs = confidence_set(obs, sc.default_instruments, opts.alpha, opts);
    timings.push_back({name, "mi", now_seconds() - t0});
  }

  fs::create_directories(out_dir);
  EstimateTable et = render_table(name, targets, pf, cf, cs, obs.n);
  {
    std::ofstream os(fs::path(out_dir) / (name + "_estimates.csv"));
    os << table_to_csv(et);
  }
  {
    std::ofstream os(fs::path(out_dir) / (name + "_timings.csv"));
    os << timing_report(timings);
  }
  std::vector<ReturnsDistribution> rds{probit_returns(pf, obs),
                                       cf_returns(cf, obs)};
  VectorXd support = default_support(rds);
  write_density_dat(support, pooled_density(rds[0], support),
                    (fs::path(out_dir) / (name + "_density_probit.dat")).string());
  write_density_dat(support, pooled_density(rds[1], support),
                    (fs::path(out_dir) / (name + "_density_cf.dat")).string());

  // pass/fail against the population targets
  Tolerances tol = load_tolerances(tol_path);
  bool probit_consistent =
      std::find(tol.probit_consistent.begin(), tol.probit_consistent.end(),
                name) != tol.probit_consistent.end();
  json checks = json::array();
  bool all_ok = true;
  auto check = [&](const std::string& what, double est, double target,
                   double t) {
    const bool ok = std::abs(est - target) <= t;
    all_ok = all_ok && ok;
    checks.push_back({{"check", what}, {"estimate", est}, {"target", target},
                      {"tolerance", t}, {"pass", ok}});
  };
  for (int jth = 0; jth < targets.theta_true.size(); ++jth)
    check("cf.theta_" + std::to_string(jth), cf.theta(jth),
          targets.theta_true(jth), tol.theta);
  check("cf.rho", cf.rho, targets.rho_true, tol.rho);
  check("cf.sigma_zeta", cf.sigma_zeta, targets.sigma_zeta_true,
        tol.sigma_zeta);
  if (probit_consistent) {
    for (int jth = 0; jth < targets.theta_true.size(); ++jth)
      check("probit.theta_" + std::to_string(jth), pf.theta(jth),
            targets.theta_true(jth), tol.theta);
    check("probit.sigma", pf.sigma, targets.sigma_true, tol.sigma);
  }
  json j = {{"table", table}, {"scenario", name}, {"n", obs.n},
            {"out_dir", out_dir}, {"checks", checks}, {"pass", all_ok}};
  if (cs) j["mi"] = cs_to_json(*cs);
  std::cout << j.dump(2) << "\n";
  return all_ok ? 0 : 1;
}

int run_sweep(const std::string& scenario, const std::string& config, int reps,
              int n, long long seed, const std::string& out) {
  DgpSpec spec;
  std::vector<int> cols;
  if (!config.empty()) {
    spec = load_dgp_json(config);
  } else {
    Scenario sc = find_scenario(scenario);
    spec = sc.spec;
    cols = sc.default_instruments;
  }
  if (n > 0) spec.n = n;
  if (seed >= 0) spec.seed = static_cast<std::uint64_t>(seed);
  ScenarioTargets targets = analytic_targets(spec, cols);

  const int k = static_cast<int>(spec.beta.size());
  MatrixXd probit_theta(reps, k), cf_theta(reps, k);
  VectorXd probit_sigma(reps), cf_rho(reps), cf_sz(reps);
  std::ostringstream rows;
  rows << "rep,stream";
  for (int jth = 0; jth < k; ++jth) rows << ",probit_theta_" << jth;
  rows << ",probit_sigma";
  for (int jth = 0; jth < k; ++jth) rows << ",cf_theta_" << jth;
  rows << ",cf_rho,cf_sigma_zeta\n";
  for (int r = 0; r < reps; ++r) {
    DgpSpec rs = spec;
    rs.stream = spec.stream + static_cast<std::uint64_t>(r);
    Sample samp = generate(rs).observed();
    std::vector<int> use = cols.empty() ? all_excluded_instruments(samp) : cols;
    ProbitFit pf = fit_probit(samp);
    CfFit cf = fit_cf(samp, use);
    probit_theta.row(r) = pf.theta.transpose();
    cf_theta.row(r) = cf.theta.transpose();
    probit_sigma(r) = pf.sigma;
    cf_rho(r) = cf.rho;
    cf_sz(r) = cf.sigma_zeta;
    rows << r << ',' << rs.stream;
    for (int jth = 0; jth < k; ++jth) rows << ',' << pf.theta(jth);
    rows << ',' << pf.sigma;
    for (int jth = 0; jth < k; ++jth) rows << ',' << cf.theta(jth);
    rows << ',' << cf.rho << ',' << cf.sigma_zeta << '\n';
  }
  auto mean_sd = [&](const VectorXd& v) {
    const double m = v.mean();
    const double sd =
        std::sqrt((v.array() - m).square().sum() / std::max(1, reps - 1));
    return json{{"mean", m}, {"sd", sd}};
  };
  json summary;
  for (int jth = 0; jth < k; ++jth) {
    summary["probit_theta_" + std::to_string(jth)] =
        mean_sd(probit_theta.col(jth));
    summary["cf_theta_" + std::to_string(jth)] = mean_sd(cf_theta.col(jth));
  }
  summary["probit_sigma"] = mean_sd(probit_sigma);
  summary["cf_rho"] = mean_sd(cf_rho);
  summary["cf_sigma_zeta"] = mean_sd(cf_sz);
  json j = {{"scenario", spec.label}, {"reps", reps}, {"n", spec.n},
            {"targets",
             {{"theta", vec_to_json(targets.theta_true)},
              {"sigma", targets.sigma_true},
              {"rho", targets.rho_true},
              {"sigma_zeta", targets.sigma_zeta_true}}},
            {"summary", summary}};
  if (!out.empty()) {
    fs::create_directories(fs::path(out).parent_path().empty()
                               ? "."
                               : fs::path(out).parent_path().string());
    std::ofstream os(out);
    os << rows.str();
    j["replications_csv"] = out;
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* t = std::getenv("LR_THREADS")) {
    const int nt = std::atoi(t);
    if (nt > 0) omp_set_num_threads(nt);
  }

  CLI::App app{"Perceived-returns estimators for binary choice under price "
               "uncertainty"};
  app.require_subcommand(1);

  std::string scenario = "sim1", config, data, out, out_dir = "out";
  std::string instruments, method = "probit", table = "1", tol_path;
  int n = 0, min_points = 50, draws = 1000, reps = 20;
  long long seed = -1;
  double alpha = 0.05;
  bool with_mi = false;

  auto* sim = app.add_subcommand("simulate", "Draw a simulated data set");
  sim->add_option("--scenario", scenario, "built-in scenario name");
  sim->add_option("--config", config, "DGP description (JSON)");
  sim->add_option("--n", n, "sample size override");
  sim->add_option("--seed", seed, "seed override");
  sim->add_option("--out", out_dir, "output directory");

  auto* est = app.add_subcommand("estimate", "Fit one estimator");
  est->add_option("method", method, "probit | cf | mi")->required();
  est->add_option("--data", data, "sample CSV (from simulate)");
  est->add_option("--scenario", scenario, "generate from a built-in scenario");
  est->add_option("--config", config, "generate from a DGP JSON");
  est->add_option("--n", n, "sample size override");
  est->add_option("--seed", seed, "seed override");
  est->add_option("--instruments", instruments,
                  "comma-separated excluded-instrument indices, or 'all'");
  est->add_option("--alpha", alpha, "confidence level for mi");
  est->add_option("--min-points", min_points, "minimum accepted grid points");
  est->add_option("--draws", draws, "criterion simulation draws");
  est->add_option("--out", out, "JSON output path ('-' for stdout)");

  auto* rep = app.add_subcommand("reproduce",
                                 "Re-run a published simulation design");
  rep->add_option("--table", table, "1, 2, or A1..A7")->required();
  rep->add_option("--n", n, "sample size override");
  rep->add_option("--seed", seed, "seed override");
  rep->add_option("--out", out_dir, "output directory");
  rep->add_flag("--with-mi", with_mi, "also run the inequality confidence set");
  rep->add_option("--tolerances", tol_path,
                  "pass/fail tolerance file (JSON)");

  auto* sw = app.add_subcommand("sweep", "Monte Carlo over replications");
  sw->add_option("--scenario", scenario, "built-in scenario name");
  sw->add_option("--config", config, "DGP description (JSON)");
  sw->add_option("--reps", reps, "number of replications");
  sw->add_option("--n", n, "sample size override");
  sw->add_option("--seed", seed, "seed override");
  sw->add_option("--out", out, "per-replication CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed())
      return run_simulate(scenario, config, n, seed, out_dir);
    if (est->parsed())
      return run_estimate(method, data, scenario, config, n, seed, instruments,
                          alpha, min_points, draws, out);
    if (rep->parsed()) {
      if (tol_path.empty()) {
        // default: sibling of the binary, as installed by the build
        tol_path = (fs::path(argv[0]).parent_path() /
                    "reproduce_tolerances.json").string();
      }
      return run_reproduce(table, n, seed, out_dir, with_mi, tol_path);
    }
    if (sw->parsed())
      return run_sweep(scenario, config, reps, n, seed, out);
  } catch (const std::exception& e) {
    json err = {{"error", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 2;
}
