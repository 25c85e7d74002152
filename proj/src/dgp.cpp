#include "pret/dgp.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace pret {

void DgpSpec::validate() const {
  if (sigma_joint.rows() < 3)
    throw std::invalid_argument("sigma_joint must cover (z.., u, nu, eps)");
  validate_covariance(sigma_joint);
  if (delta.size() != 1 + p())
    throw std::invalid_argument("delta length must be 1 + #instruments");
  if (beta.size() != 1 + static_cast<int>(x_extra_vars.size()))
    throw std::invalid_argument("beta length must match X columns");
  if (n < 100) throw std::invalid_argument("n must be >= 100");
}

Sample generate(const DgpSpec& spec) {
  spec.validate();
  const int p = spec.p();
  const int n = spec.n;
  const int n_extra = static_cast<int>(spec.x_extra_vars.size());
  const int k = 1 + n_extra;

  RngStream rng(spec.seed, spec.stream);
  const MatrixXd L = cholesky_psd(spec.sigma_joint);
  const MatrixXd draws = mvn_sample(L, n, rng);  // cols: z_1..z_p, u, nu, eps

  Sample out;
  out.n = n;
  out.x.resize(n, k);
  out.x.col(0).setOnes();
  for (int j = 0; j < n_extra; ++j) {
    const double sd = std::sqrt(spec.x_extra_vars[j]);
    for (int i = 0; i < n; ++i) out.x(i, 1 + j) = sd * rng.next_normal();
  }
  out.z.resize(n, k + p);
  out.z.leftCols(k) = out.x;
  out.z.rightCols(p) = draws.leftCols(p);

  HiddenBlock h;
  h.u = draws.col(p);
  h.nu = draws.col(p + 1);
  h.eps = draws.col(p + 2);

  out.price = VectorXd::Constant(n, spec.delta(0)) +
              draws.leftCols(p) * spec.delta.tail(p) + h.u;
  h.pi = out.x * spec.beta - (out.price + h.nu) + h.eps;
  out.s.resize(n);
  for (int i = 0; i < n; ++i) out.s(i) = h.pi(i) >= 0.0 ? 1.0 : 0.0;
  out.hidden = std::move(h);
  out.validate();
  return out;
}

ScenarioTargets analytic_targets(const DgpSpec& spec,
                                 const std::vector<int>& instrument_subset) {
  spec.validate();
  const int p = spec.p();
  std::vector<bool> used(p, false);
  for (int c : instrument_subset) {
    if (c < 0 || c >= p) throw std::invalid_argument("bad instrument index");
    used[c] = true;
  }
  const auto& S = spec.sigma_joint;
  const int iu = p, inu = p + 1, ieps = p + 2;

  // e = -nu + eps
  const double var_e = S(inu, inu) + S(ieps, ieps) - 2.0 * S(inu, ieps);
  auto cov_with_e = [&](int idx) { return -S(idx, inu) + S(idx, ieps); };

  // u_eff = u + sum over unused instruments of delta_c * z_c
  double var_ueff = S(iu, iu);
  double cov_ueff_e = cov_with_e(iu);
  for (int c = 0; c < p; ++c) {
    if (used[c]) continue;
    const double dc = spec.delta(1 + c);
    var_ueff += 2.0 * dc * S(c, iu);
    cov_ueff_e += dc * cov_with_e(c);
    for (int c2 = 0; c2 < p; ++c2)
      if (!used[c2]) var_ueff += dc * spec.delta(1 + c2) * S(c, c2);
  }

  ScenarioTargets t;
  t.theta_true = spec.beta;
  t.sigma_true = std::sqrt(var_e);
  t.sigma_eps_true = std::sqrt(S(ieps, ieps));
  if (var_ueff <= 0.0)
    throw std::runtime_error("effective first-stage variance is zero; rho undefined");
  t.rho_true = cov_ueff_e / var_ueff;
  t.sigma_zeta_true = std::sqrt(var_e - t.rho_true * t.rho_true * var_ueff);
  t.sigma_xi_true = t.sigma_zeta_true;
  return t;
}

namespace {

MatrixXd mat4(double a, double b, double c, double d) {
  MatrixXd S = MatrixXd::Zero(4, 4);
  S(0, 0) = a;
  S(1, 1) = b;
  S(2, 2) = c;
  S(3, 3) = d;
  return S;
}

Scenario make(std::string label, MatrixXd sigma, VectorXd beta, VectorXd delta,
              std::vector<double> x_extra, std::vector<int> instruments) {
  Scenario sc;
  sc.spec.label = std::move(label);
  sc.spec.sigma_joint = std::move(sigma);
  sc.spec.beta = std::move(beta);
  sc.spec.delta = std::move(delta);
  sc.spec.x_extra_vars = std::move(x_extra);
  sc.spec.n = 10000;
  sc.default_instruments = instruments;
  sc.targets = analytic_targets(sc.spec, instruments);
  return sc;
}

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

std::vector<Scenario> builtin_scenarios() {
  std::vector<Scenario> out;

  // order everywhere: (z_1..z_p, u, nu, eps)
  out.push_back(make("sim1", mat4(4, 1, 2, 2), vec({1}), vec({0, 1}), {}, {0}));

  {
    MatrixXd S = MatrixXd::Zero(5, 5);
    // (z1, z2, u, nu, eps)
    S(0, 0) = 9;
    S(1, 1) = 9;
    S(2, 2) = 27;
    S(3, 3) = 9;
    S(4, 4) = 16;
    S(0, 3) = S(3, 0) = -4;  // z1 leaks into misperceptions: invalid IV
    S(2, 3) = S(3, 2) = -5;
    S(2, 4) = S(4, 2) = 9;
    out.push_back(make("sim2", S, vec({1}), vec({0, 1, 1}), {}, {1}));
  }

  out.push_back(make("A1", mat4(4, 1, 0, 4), vec({1}), vec({0, 1}), {}, {0}));

  {
    MatrixXd S = mat4(4, 7, 12, 4);
    S(1, 2) = S(2, 1) = -7;
    out.push_back(make("A2", S, vec({1}), vec({0, 1}), {}, {0}));
  }
  {
    MatrixXd S = mat4(4, 7, 0, 16);
    S(1, 3) = S(3, 1) = 7;
    out.push_back(make("A3", S, vec({1}), vec({0, 1}), {}, {0}));
  }
  {
    MatrixXd S = mat4(4, 20, 0, 9);
    S(1, 3) = S(3, 1) = -10;
    out.push_back(make("A4", S, vec({1}), vec({0, 1}), {}, {0}));
  }
  MatrixXd sA5 = mat4(4, 7, 12, 4);
  sA5(1, 2) = sA5(2, 1) = -3;
  sA5(1, 3) = sA5(3, 1) = 4;
  out.push_back(make("A5", sA5, vec({1}), vec({0, 1}), {}, {0}));
  out.push_back(make("A6", sA5, vec({1, 0}), vec({0, 1}), {4.0}, {0}));
  out.push_back(make("A7", sA5, vec({1, 0, 0}), vec({0, 1}), {4.0, 4.0}, {0}));
  return out;
}

Scenario find_scenario(const std::string& name) {
  for (auto& sc : builtin_scenarios())
    if (sc.spec.label == name) return sc;
  throw std::invalid_argument("unknown scenario: " + name);
}

DgpSpec load_dgp_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  is >> j;
  DgpSpec spec;
  spec.label = j.value("label", std::string("custom"));
  spec.n = j.value("n", 10000);
  spec.seed = j.value("seed", std::uint64_t{0});
  spec.stream = j.value("stream", std::uint64_t{0});
  auto beta = j.at("beta").get<std::vector<double>>();
  auto delta = j.at("delta").get<std::vector<double>>();
  spec.beta = Eigen::Map<VectorXd>(beta.data(), beta.size());
  spec.delta = Eigen::Map<VectorXd>(delta.data(), delta.size());
  if (j.contains("x_extra"))
    spec.x_extra_vars = j.at("x_extra").get<std::vector<double>>();
  auto rows = j.at("sigma").get<std::vector<std::vector<double>>>();
  const int d = static_cast<int>(rows.size());
  spec.sigma_joint.resize(d, d);
  for (int i = 0; i < d; ++i) {
    if (static_cast<int>(rows[i].size()) != d)
      throw std::runtime_error("sigma must be square");
    for (int c = 0; c < d; ++c) spec.sigma_joint(i, c) = rows[i][c];
  }
  spec.validate();
  return spec;
}

void save_dgp_json(const DgpSpec& spec, const std::string& path) {
  spec.validate();
  nlohmann::json j;
  j["label"] = spec.label;
  j["n"] = spec.n;
  j["seed"] = spec.seed;
  j["stream"] = spec.stream;
  j["beta"] = std::vector<double>(spec.beta.data(),
                                  spec.beta.data() + spec.beta.size());
  j["delta"] = std::vector<double>(spec.delta.data(),
                                   spec.delta.data() + spec.delta.size());
  j["x_extra"] = spec.x_extra_vars;
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < spec.sigma_joint.rows(); ++i) {
    rows.emplace_back();
    for (int c = 0; c < spec.sigma_joint.cols(); ++c)
      rows.back().push_back(spec.sigma_joint(i, c));
  }
  j["sigma"] = rows;
  std::ofstream os(path);
  os << j.dump(2) << '\n';
}

}  // namespace pret
