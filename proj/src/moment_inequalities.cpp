#include "pret/moment_inequalities.hpp"

#include "pret/kernels.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace pret {

VectorXd PsiPoint::as_vector() const {
  VectorXd v(dim());
  v << theta, sigma_eps;
  return v;
}

PsiPoint PsiPoint::from_vector(const VectorXd& v) {
  PsiPoint p;
  p.theta = v.head(v.size() - 1);
  p.sigma_eps = v(v.size() - 1);
  return p;
}

namespace {

constexpr double kOddsCap = 1e300;

// base moments at a scaled index a; returns rp1, rp2, ob1, ob2
inline void base_moments(double a, double s, double out[4], bool& saturated) {
  const double mills_upper = inverse_mills(a, Tail::upper);  // phi/(1-Phi)
  const double mills_lower = inverse_mills(a, Tail::lower);  // phi/Phi
  out[0] = s * a + (1.0 - s) * mills_upper;
  out[1] = -(1.0 - s) * a + s * mills_lower;
  // odds ratios via the Mills ratios: (1-Phi)/Phi = lower/upper
  double odds_against = mills_lower / mills_upper;  // (1-Phi)/Phi
  double odds_for = mills_upper / mills_lower;      // Phi/(1-Phi)
  if (odds_against > kOddsCap) {
    odds_against = kOddsCap;
    saturated = true;
  }
  if (odds_for > kOddsCap) {
    odds_for = kOddsCap;
    saturated = true;
  }
  out[2] = s * odds_against - (1.0 - s);
  out[3] = (1.0 - s) * odds_for - s;
}

inline double scaled_index(const PsiPoint& psi, const Sample& sample, int row) {
  if (!(psi.sigma_eps > 0.0))
    throw std::invalid_argument("sigma_eps must be positive");
  return (sample.x.row(row).dot(psi.theta) - sample.price(row)) /
         psi.sigma_eps;
}

double column_median(const VectorXd& v) {
  std::vector<double> c(v.data(), v.data() + v.size());
  const size_t mid = c.size() / 2;
  std::nth_element(c.begin(), c.begin() + mid, c.end());
  double hi = c[mid];
  if (c.size() % 2 == 0) {
    double lo = *std::max_element(c.begin(), c.begin() + mid);
    return 0.5 * (lo + hi);
  }
  return hi;
}

void fill_row(const PsiPoint& psi, const Sample& sample,
              const std::vector<int>& cols, const std::vector<double>& medians,
              int i, MatrixXd& out, bool& saturated) {
  const double a = scaled_index(psi, sample, i);
  double base[4];
  bool sat = false;
  base_moments(a, sample.s(i), base, sat);
  if (sat) saturated = true;
  for (int b = 0; b < 4; ++b) out(i, b) = base[b];
  for (size_t c = 0; c < cols.size(); ++c) {
    const double above =
        sample.z(i, sample.k() + cols[c]) > medians[c] ? 1.0 : 0.0;
    for (int b = 0; b < 4; ++b) {
      out(i, 4 * (1 + 2 * c) + b) = above * base[b];
      out(i, 4 * (2 + 2 * c) + b) = (1.0 - above) * base[b];
    }
  }
}

}  // namespace

namespace kernels {

MatrixXd moment_matrix_serial(const PsiPoint& psi, const Sample& sample,
                              const std::vector<int>& instrument_columns,
                              const std::vector<double>& medians,
                              bool& saturated) {
  const int L = 4 * (1 + 2 * static_cast<int>(instrument_columns.size()));
  MatrixXd out(sample.n, L);
  saturated = false;
  for (int i = 0; i < sample.n; ++i)
    fill_row(psi, sample, instrument_columns, medians, i, out, saturated);
  return out;
}

MatrixXd moment_matrix_omp(const PsiPoint& psi, const Sample& sample,
                           const std::vector<int>& instrument_columns,
                           const std::vector<double>& medians,
                           bool& saturated) {
  const int L = 4 * (1 + 2 * static_cast<int>(instrument_columns.size()));
  MatrixXd out(sample.n, L);
  bool sat = false;
#pragma omp parallel for schedule(static) reduction(|| : sat)
  for (int i = 0; i < sample.n; ++i)
    fill_row(psi, sample, instrument_columns, medians, i, out, sat);
  saturated = sat;
  return out;
}

VectorXd q_draws_serial(const MatrixXd& omega_sqrt, const MatrixXd& chi,
                        const std::vector<bool>& binding) {
  const int R = static_cast<int>(chi.rows());
  const int L = static_cast<int>(omega_sqrt.rows());
  VectorXd out(R);
  for (int r = 0; r < R; ++r) {
    double q = 0.0;
    for (int l = 0; l < L; ++l) {
      if (!binding[l]) continue;
      const double v = omega_sqrt.row(l).dot(chi.row(r).head(L));
      if (v < 0.0) q += v * v;
    }
    out(r) = q;
  }
  return out;
}

VectorXd q_draws_omp(const MatrixXd& omega_sqrt, const MatrixXd& chi,
                     const std::vector<bool>& binding) {
  const int R = static_cast<int>(chi.rows());
  const int L = static_cast<int>(omega_sqrt.rows());
  VectorXd out(R);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < R; ++r) {
    double q = 0.0;
    for (int l = 0; l < L; ++l) {
      if (!binding[l]) continue;
      const double v = omega_sqrt.row(l).dot(chi.row(r).head(L));
      if (v < 0.0) q += v * v;
    }
    out(r) = q;
  }
  return out;
}

}  // namespace kernels

std::pair<double, double> rp_moments(const PsiPoint& psi, const Sample& sample,
                                     int row) {
  const double a = scaled_index(psi, sample, row);
  double base[4];
  bool sat = false;
  base_moments(a, sample.s(row), base, sat);
  return {base[0], base[1]};
}

std::pair<double, double> ob_moments(const PsiPoint& psi, const Sample& sample,
                                     int row) {
  const double a = scaled_index(psi, sample, row);
  double base[4];
  bool sat = false;
  base_moments(a, sample.s(row), base, sat);
  return {base[2], base[3]};
}

MomentSet build_unconditional_moments(
    const PsiPoint& psi, const Sample& sample,
    const std::vector<int>& instrument_columns) {
  std::vector<double> medians;
  for (int c : instrument_columns) {
    if (c < 0 || c >= sample.m() - sample.k())
      throw std::invalid_argument("instrument column out of range");
    medians.push_back(column_median(sample.z.col(sample.k() + c)));
  }
  bool saturated = false;
  MatrixXd raw = kernels::moment_matrix_omp(psi, sample, instrument_columns,
                                            medians, saturated);
  static const char* kBase[4] = {"rp1", "rp2", "ob1", "ob2"};
  std::vector<std::string> labels;
  const int nc = static_cast<int>(instrument_columns.size());
  for (int g = 0; g < 1 + 2 * nc; ++g) {
    std::string cell = "const";
    if (g > 0) {
      const int c = instrument_columns[(g - 1) / 2];
      cell = "z_" + std::to_string(c + 1) + ((g - 1) % 2 == 0 ? ">med" : "<=med");
    }
    for (int b = 0; b < 4; ++b) labels.push_back(std::string(kBase[b]) + ":" + cell);
  }

  MomentSet ms;
  ms.saturated = saturated;
  const VectorXd means = raw.colwise().mean();
  std::vector<int> keep;
  for (int l = 0; l < raw.cols(); ++l) {
    const double var = (raw.col(l).array() - means(l)).square().mean();
    if (var > 0.0)
      keep.push_back(l);
    else
      ms.dropped.push_back(l);
  }
  if (keep.empty()) throw std::runtime_error("all moments have zero variance");
  ms.values.resize(sample.n, keep.size());
  ms.means.resize(keep.size());
  ms.sds.resize(keep.size());
  for (size_t j = 0; j < keep.size(); ++j) {
    ms.values.col(j) = raw.col(keep[j]);
    ms.means(j) = means(keep[j]);
    ms.sds(j) =
        std::sqrt((raw.col(keep[j]).array() - means(keep[j])).square().mean());
    ms.labels.push_back(labels[keep[j]]);
  }
  return ms;
}

double q_statistic(const MomentSet& ms, int n) {
  if (ms.L() == 0) throw std::runtime_error("empty moment set");
  const double root_n = std::sqrt(static_cast<double>(n));
  double q = 0.0;
  for (int l = 0; l < ms.L(); ++l) {
    const double v = std::min(root_n * ms.means(l) / ms.sds(l), 0.0);
    q += v * v;
  }
  return q;
}

namespace {

// symmetric square root with eigenvalues clipped at 1e-12
MatrixXd psd_sqrt(const MatrixXd& omega, bool& clipped) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 *
                                              (omega + omega.transpose()));
  VectorXd ev = eig.eigenvalues();
  clipped = false;
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) < 1e-12) {
      if (ev(i) < -1e-10) clipped = true;
      ev(i) = 1e-12;
    }
  }
  return eig.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

double critical_value_core(const MomentSet& ms, int n, double alpha,
                           const MatrixXd& chi, bool* clipped_out) {
  const int L = ms.L();
  const MatrixXd centered = ms.values.rowwise() - ms.means.transpose();
  const MatrixXd sigma = (centered.transpose() * centered) / n;
  const VectorXd dinv = sigma.diagonal().cwiseSqrt().cwiseInverse();
  const MatrixXd omega = dinv.asDiagonal() * sigma * dinv.asDiagonal();
  bool clipped = false;
  const MatrixXd omega_sqrt = psd_sqrt(omega, clipped);
  if (clipped_out) *clipped_out = clipped;

  const double slack = std::sqrt(std::log(static_cast<double>(n)));
  const double root_n = std::sqrt(static_cast<double>(n));
  std::vector<bool> binding(L);
  bool any = false;
  for (int l = 0; l < L; ++l) {
    binding[l] = root_n * ms.means(l) / ms.sds(l) <= slack;
    any = any || binding[l];
  }
  if (!any) return 0.0;

  VectorXd draws = kernels::q_draws_omp(omega_sqrt, chi, binding);
  std::sort(draws.data(), draws.data() + draws.size());
  const int R = static_cast<int>(draws.size());
  int idx = static_cast<int>(std::ceil((1.0 - alpha) * R)) - 1;
  idx = std::clamp(idx, 0, R - 1);
  return draws(idx);
}

MatrixXd draw_chi(int R, int L, RngStream& rng) {
  MatrixXd chi(R, L);
  for (int r = 0; r < R; ++r)
    for (int l = 0; l < L; ++l) chi(r, l) = rng.next_normal();
  return chi;
}

}  // namespace

double as_critical_value(const MomentSet& ms, int n, double alpha, int draws,
                         RngStream& rng) {
  if (draws < 100) throw std::invalid_argument("need at least 100 draws");
  const MatrixXd chi = draw_chi(draws, ms.L(), rng);
  return critical_value_core(ms, n, alpha, chi, nullptr);
}

VectorXd ConfidenceSet::lower_bounds() const {
  if (accepted.empty()) throw std::runtime_error("empty confidence set");
  VectorXd lo = accepted.front().psi.as_vector();
  for (const auto& a : accepted) lo = lo.cwiseMin(a.psi.as_vector());
  return lo;
}

VectorXd ConfidenceSet::upper_bounds() const {
  if (accepted.empty()) throw std::runtime_error("empty confidence set");
  VectorXd hi = accepted.front().psi.as_vector();
  for (const auto& a : accepted) hi = hi.cwiseMax(a.psi.as_vector());
  return hi;
}

MmmEngine::MmmEngine(const Sample& sample, std::vector<int> instrument_columns,
                     const MiOptions& options)
    : sample_(sample), cols_(std::move(instrument_columns)), opts_(options) {
  const int l_max = 4 * (1 + 2 * static_cast<int>(cols_.size()));
  RngStream rng(opts_.seed, opts_.stream);
  chi_ = draw_chi(opts_.draws, l_max, rng);
}

MmmEngine::PointTest MmmEngine::test_point(const PsiPoint& psi) const {
  MomentSet ms = build_unconditional_moments(psi, sample_, cols_);
  const double q = q_statistic(ms, sample_.n);
  const double cv =
      critical_value_core(ms, sample_.n, opts_.alpha, chi_, nullptr);
  return {q, cv, q <= cv};
}

double MmmEngine::q_only(const PsiPoint& psi) const {
  MomentSet ms = build_unconditional_moments(psi, sample_, cols_);
  return q_statistic(ms, sample_.n);
}

namespace {

// derivative-free simplex minimization; Q has kinks at the min(.,0) edges
VectorXd nelder_mead(const std::function<double(const VectorXd&)>& f,
                     VectorXd x0, const VectorXd& scale, int max_iter) {
  const int d = static_cast<int>(x0.size());
  std::vector<VectorXd> xs(d + 1, x0);
  std::vector<double> fs(d + 1);
  for (int j = 0; j < d; ++j) xs[j + 1](j) += std::max(scale(j), 1e-6);
  for (int j = 0; j <= d; ++j) fs[j] = f(xs[j]);

  for (int it = 0; it < max_iter; ++it) {
    std::vector<int> ord(d + 1);
    std::iota(ord.begin(), ord.end(), 0);
    std::sort(ord.begin(), ord.end(),
              [&](int a, int b) { return fs[a] < fs[b]; });
    std::vector<VectorXd> xs2;
    std::vector<double> fs2;
    for (int j : ord) {
      xs2.push_back(xs[j]);
      fs2.push_back(fs[j]);
    }
    xs = xs2;
    fs = fs2;
    if (fs[d] - fs[0] < 1e-12 * (1.0 + std::abs(fs[0]))) break;

    VectorXd centroid = VectorXd::Zero(d);
    for (int j = 0; j < d; ++j) centroid += xs[j];
    centroid /= d;
    VectorXd xr = centroid + (centroid - xs[d]);
    double fr = f(xr);
    if (fr < fs[0]) {
      VectorXd xe = centroid + 2.0 * (centroid - xs[d]);
      double fe = f(xe);
      if (fe < fr) {
        xs[d] = xe;
        fs[d] = fe;
      } else {
        xs[d] = xr;
        fs[d] = fr;
      }
    } else if (fr < fs[d - 1]) {
      xs[d] = xr;
      fs[d] = fr;
    } else {
      VectorXd xc = centroid + 0.5 * (xs[d] - centroid);
      double fc = f(xc);
      if (fc < fs[d]) {
        xs[d] = xc;
        fs[d] = fc;
      } else {
        for (int j = 1; j <= d; ++j) {
          xs[j] = xs[0] + 0.5 * (xs[j] - xs[0]);
          fs[j] = f(xs[j]);
        }
      }
    }
  }
  int best = 0;
  for (int j = 1; j <= d; ++j)
    if (fs[j] < fs[best]) best = j;
  return xs[best];
}

using Key = std::vector<long long>;

}  // namespace

ConfidenceSet confidence_set(const Sample& sample,
                             const std::vector<int>& instrument_columns,
                             double alpha, const MiOptions& options) {
  const auto t_start = std::chrono::steady_clock::now();
  MiOptions opts = options;
  opts.alpha = alpha;
  MmmEngine engine(sample, instrument_columns, opts);

  // Step 1: control-function start and grid geometry
  CfFit cf = fit_cf(sample, instrument_columns);
  const int k = sample.k();
  const int K = k + 1;
  VectorXd se(K);
  for (int j = 0; j < k; ++j) se(j) = cf.se_mt(j);
  se(K - 1) = cf.se_mt(k);  // sigma_zeta slot seeds the sigma_eps dimension
  for (int j = 0; j < K; ++j) se(j) = std::max(se(j), 1e-4);

  VectorXd start(K);
  start << cf.theta, cf.sigma_zeta;
  auto objective = [&](const VectorXd& v) {
    if (v(K - 1) <= 1e-8) return 1e12;
    return engine.q_only(PsiPoint::from_vector(v));
  };
  const VectorXd psi_min =
      nelder_mead(objective, start, se, opts.nm_max_iter);

  VectorXd step0 = (2.0 * opts.se_multiplier / (opts.grid_points_per_dim - 1)) *
                   se;

  ConfidenceSet cs;
  cs.alpha = alpha;

  // lattice: point(key) = psi_min + key .* step0 / 2^level
  int level = 0;
  std::map<Key, bool> checked;  // value: accepted
  std::vector<Key> accepted_keys;
  auto point_of = [&](const Key& key) {
    VectorXd v(K);
    const double scale = std::pow(2.0, -level);
    for (int j = 0; j < K; ++j) v(j) = psi_min(j) + key[j] * step0(j) * scale;
    return v;
  };
  // the search stays inside the initial +-se_multiplier*SE box; without the
  // clamp an unbounded acceptance direction (often large sigma) never stops
  const long long npd_half = opts.grid_points_per_dim / 2;
  auto in_box = [&](const Key& key) {
    const long long lim = npd_half << level;
    for (int j = 0; j < K; ++j)
      if (key[j] < -lim || key[j] > lim) return false;
    return true;
  };

  auto evaluate_wave = [&](const std::vector<Key>& wave) {
    const int nw = static_cast<int>(wave.size());
    std::vector<MmmEngine::PointTest> results(nw);
    std::vector<bool> valid(nw, false);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < nw; ++i) {
      const VectorXd v = point_of(wave[i]);
      if (v(K - 1) > 1e-8) {
        results[i] = engine.test_point(PsiPoint::from_vector(v));
        valid[i] = true;
      }
    }
    for (int i = 0; i < nw; ++i) {
      cs.points_tested++;
      const bool ok = valid[i] && results[i].accepted;
      checked[wave[i]] = ok;
      if (ok) {
        cs.accepted.push_back({PsiPoint::from_vector(point_of(wave[i])),
                               results[i].q, results[i].critical_value});
        accepted_keys.push_back(wave[i]);
      } else if (valid[i]) {
        cs.rejected_boundary.push_back(PsiPoint::from_vector(point_of(wave[i])));
      }
    }
  };

  // initial 10^K grid in ascending distance from psi_min, stopping at the
  // first acceptance
  {
    std::vector<Key> grid;
    const int npd = opts.grid_points_per_dim;
    std::vector<int> idx(K, 0);
    while (true) {
      Key key(K);
      for (int j = 0; j < K; ++j) key[j] = idx[j] - npd / 2;
      grid.push_back(key);
      int j = 0;
      for (; j < K; ++j) {
        if (++idx[j] < npd) break;
        idx[j] = 0;
      }
      if (j == K) break;
    }
    std::sort(grid.begin(), grid.end(), [&](const Key& a, const Key& b) {
      double da = 0, db = 0;
      for (int j = 0; j < K; ++j) {
        da += double(a[j]) * a[j] * step0(j) * step0(j);
        db += double(b[j]) * b[j] * step0(j) * step0(j);
      }
      if (da != db) return da < db;
      return a < b;
    });
    for (const auto& key : grid) {
      evaluate_wave({key});
      if (!cs.accepted.empty()) break;
    }
    if (cs.accepted.empty()) {
      cs.warnings.push_back("no grid point accepted: empty confidence set");
      cs.grid_step = step0;
      cs.runtime_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        t_start)
              .count();
      return cs;
    }
  }

  // frontier expansion with 3-per-dimension orthotopes around accepted
  // points, then refinement halving until the set is large enough
  size_t seeded_upto = 0;
  for (int refine = 0; refine <= opts.max_refinements; ++refine) {
    while (true) {
      std::vector<Key> frontier;
      std::set<Key> pending;
      for (; seeded_upto < accepted_keys.size(); ++seeded_upto) {
        const Key& center = accepted_keys[seeded_upto];
        std::vector<int> off(K, -1);
        while (true) {
          Key nb(K);
          for (int j = 0; j < K; ++j) nb[j] = center[j] + off[j];
          if (in_box(nb) && !checked.count(nb) && pending.insert(nb).second)
            frontier.push_back(nb);
          int j = 0;
          for (; j < K; ++j) {
            if (++off[j] <= 1) break;
            off[j] = -1;
          }
          if (j == K) break;
        }
      }
      if (frontier.empty()) break;
      std::sort(frontier.begin(), frontier.end());
      evaluate_wave(frontier);
    }
    if (static_cast<int>(cs.accepted.size()) >= opts.min_points) break;
    if (refine == opts.max_refinements) {
      cs.warnings.push_back("refinement cap reached below min_points");
      break;
    }
    // halve the spacing: re-key everything at the finer level and reseed
    ++level;
    std::map<Key, bool> finer;
    for (auto& [key, acc] : checked) {
      Key dk(K);
      for (int j = 0; j < K; ++j) dk[j] = 2 * key[j];
      finer[dk] = acc;
    }
    checked = std::move(finer);
    for (auto& key : accepted_keys)
      for (int j = 0; j < K; ++j) key[j] *= 2;
    seeded_upto = 0;  // reseed neighborhoods at the new spacing
  }

  cs.grid_step = step0 / std::pow(2.0, level);
  cs.runtime_seconds = std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - t_start)
                           .count();
  return cs;
}

std::vector<ReturnsDistribution> mi_returns_bounds(
    const ConfidenceSet& cs, const Sample& sample,
    const std::vector<int>& instrument_columns,
    const std::vector<double>& phi_grid) {
  if (cs.empty()) throw std::runtime_error("empty confidence set");
  for (double phi : phi_grid)
    if (phi < 0.0 || phi > 1.0)
      throw std::invalid_argument("phi must lie in [0,1]");
  FirstStageFit fs = fit_first_stage(sample, instrument_columns);
  const int k = sample.k();
  MatrixXd zsel(sample.n, k + instrument_columns.size());
  zsel.leftCols(k) = sample.x;
  for (size_t j = 0; j < instrument_columns.size(); ++j)
    zsel.col(k + j) = sample.z.col(k + instrument_columns[j]);
  const VectorXd fitted_price = zsel * fs.delta_hat;

  std::vector<ReturnsDistribution> out;
  out.reserve(cs.accepted.size() * phi_grid.size());
  for (const auto& a : cs.accepted) {
    const VectorXd base = sample.x * a.psi.theta;
    for (double phi : phi_grid) {
      ReturnsDistribution rd;
      rd.location =
          base - phi * sample.price - (1.0 - phi) * fitted_price;
      rd.scale = a.psi.sigma_eps;
      rd.kind = ReturnsKind::mi_bound;
      out.push_back(std::move(rd));
    }
  }
  return out;
}

}  // namespace pret
