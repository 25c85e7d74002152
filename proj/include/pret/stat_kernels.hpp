#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace pret {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Standard normal density. Throws std::domain_error on non-finite input.
double normal_pdf(double x);

// Standard normal CDF, absolute error below 1e-12; never underflows to 0
// for |x| <= 38.
double normal_cdf(double x);

// log(Phi(x)), stable far into the lower tail.
double log_normal_cdf(double x);

enum class Tail { lower, upper };

// Inverse Mills ratio: phi(x)/Phi(x) for the lower tail, phi(x)/(1-Phi(x))
// for the upper tail. Accurate for |x| <= 38.
double inverse_mills(double x, Tail tail);

// Checks symmetry (1e-12) and dimension; throws std::invalid_argument.
void validate_covariance(const MatrixXd& sigma);

// Lower-triangular factor L with L*L^T = S. Semi-definite S is allowed:
// pivots in [-1e-10, 0] are clamped to zero and the column zeroed. A pivot
// below -1e-10 throws std::runtime_error.
MatrixXd cholesky_psd(const MatrixXd& sigma);

// Splittable 64-bit generator: identical (seed, stream) gives an identical
// sequence, distinct streams are independent. xoshiro256++ seeded through
// splitmix64 over (seed, stream).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);
  std::uint64_t next_u64();
  double next_uniform();       // in (0, 1)
  double next_normal();        // N(0, 1), Box-Muller
  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

 private:
  std::uint64_t s_[4];
  std::uint64_t seed_, stream_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// n rows of N(0, L*L^T) draws; deterministic given the stream state.
MatrixXd mvn_sample(const MatrixXd& chol_lower, int n, RngStream& rng);

}  // namespace pret
