// Serial-vs-OpenMP timing for the three data-parallel kernels.

#include "pret/control_function.hpp"
#include "pret/dgp.hpp"
#include "pret/kernels.hpp"
#include "pret/probit.hpp"
#include "pret/report.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

using namespace pret;

namespace {

double time_best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-18s serial %8.4f ms   omp %8.4f ms   speedup %5.2fx\n", name,
              serial * 1e3, parallel * 1e3, serial / parallel);
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());

  Scenario sc = find_scenario("sim2");
  sc.spec.n = 50000;
  Sample s = generate(sc.spec);
  const Sample obs = s.observed();
  const std::vector<int> cols = all_excluded_instruments(obs);

  // medians of the excluded instrument columns
  std::vector<double> medians;
  for (int c : cols) {
    std::vector<double> v(obs.z.col(obs.k() + c).data(),
                          obs.z.col(obs.k() + c).data() + obs.n);
    std::nth_element(v.begin(), v.begin() + obs.n / 2, v.end());
    medians.push_back(v[obs.n / 2]);
  }
  PsiPoint psi;
  psi.theta = VectorXd::Ones(obs.k());
  psi.sigma_eps = 4.0;

  bool sat = false;
  const double mm_s = time_best_of(5, [&] {
    kernels::moment_matrix_serial(psi, obs, cols, medians, sat);
  });
  const double mm_p = time_best_of(5, [&] {
    kernels::moment_matrix_omp(psi, obs, cols, medians, sat);
  });
  report("moment_matrix", mm_s, mm_p);

  CfFit cf = fit_cf(obs, cols);
  ReturnsDistribution rd = cf_returns(cf, obs);
  VectorXd support = default_support({rd}, 2048);
  const double pd_s = time_best_of(5, [&] {
    kernels::pooled_density_serial(rd, support);
  });
  const double pd_p = time_best_of(5, [&] {
    kernels::pooled_density_omp(rd, support);
  });
  report("pooled_density", pd_s, pd_p);

  const int L = 12, R = 4000;
  RngStream rng(7, 0);
  MatrixXd omega_sqrt = MatrixXd::Identity(L, L);
  MatrixXd chi(R, L);
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < L; ++j) chi(i, j) = rng.next_normal();
  std::vector<bool> binding(L, true);
  const double qd_s = time_best_of(5, [&] {
    kernels::q_draws_serial(omega_sqrt, chi, binding);
  });
  const double qd_p = time_best_of(5, [&] {
    kernels::q_draws_omp(omega_sqrt, chi, binding);
  });
  report("q_draws", qd_s, qd_p);

  // sanity: the two variants must agree exactly
  bool sat2 = false;
  const bool same =
      kernels::moment_matrix_serial(psi, obs, cols, medians, sat)
              .cwiseEqual(kernels::moment_matrix_omp(psi, obs, cols, medians,
                                                     sat2))
              .all() &&
      kernels::pooled_density_serial(rd, support)
          .cwiseEqual(kernels::pooled_density_omp(rd, support))
          .all() &&
      kernels::q_draws_serial(omega_sqrt, chi, binding)
          .cwiseEqual(kernels::q_draws_omp(omega_sqrt, chi, binding))
          .all();
  std::printf("bit-identical: %s\n", same ? "yes" : "NO");
  return same ? 0 : 1;
}
