#include "pret/stat_kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace pret {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr double kSqrt2 = 1.4142135623730950488;

void require_finite(double x) {
  if (!std::isfinite(x)) throw std::domain_error("non-finite input");
}

// log(Phi(x)) for x <= -20 via the asymptotic expansion of the Mills ratio.
double log_cdf_tail(double x) {
  const double z = -x;  // z >= 20
  const double z2 = z * z;
  // Phi(x) = phi(z)/z * (1 - 1/z^2 + 3/z^4 - 15/z^6 + 105/z^8 - ...)
  double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2) +
                  105.0 / (z2 * z2 * z2 * z2);
  return -0.5 * z2 - std::log(z) + std::log(kInvSqrt2Pi * series);
}

}  // namespace

double normal_pdf(double x) {
  require_finite(x);
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double normal_cdf(double x) {
  require_finite(x);
  return 0.5 * std::erfc(-x / kSqrt2);
}

double log_normal_cdf(double x) {
  require_finite(x);
  if (x < -20.0) return log_cdf_tail(x);
  if (x > 8.0) return std::log1p(-normal_cdf(-x));
  return std::log(normal_cdf(x));
}

double inverse_mills(double x, Tail tail) {
  require_finite(x);
  // phi(x)/Phi(x); the upper-tail ratio is the lower one at -x.
  const double t = (tail == Tail::lower) ? x : -x;
  if (t > -8.0) return normal_pdf(t) / normal_cdf(t);
  // log-space for the deep tail; both logs are finite for |t| <= 38.
  return std::exp(-0.5 * t * t + std::log(kInvSqrt2Pi) - log_cdf_tail(t));
}

void validate_covariance(const MatrixXd& sigma) {
  if (sigma.rows() < 1 || sigma.rows() != sigma.cols())
    throw std::invalid_argument("covariance must be square with dim >= 1");
  const double scale = 1.0 + sigma.cwiseAbs().maxCoeff();
  for (int i = 0; i < sigma.rows(); ++i)
    for (int j = 0; j < i; ++j)
      if (std::abs(sigma(i, j) - sigma(j, i)) > 1e-12 * scale)
        throw std::invalid_argument("covariance not symmetric");
  if (!sigma.allFinite())
    throw std::invalid_argument("covariance has non-finite entries");
}

MatrixXd cholesky_psd(const MatrixXd& sigma) {
  validate_covariance(sigma);
  const int d = static_cast<int>(sigma.rows());
  MatrixXd L = MatrixXd::Zero(d, d);
  for (int j = 0; j < d; ++j) {
    double pivot = sigma(j, j) - L.row(j).head(j).squaredNorm();
    if (pivot < -1e-10)
      throw std::runtime_error("covariance not positive semi-definite");
    if (pivot <= 0.0) {
      // degenerate direction: zero the column so draws are exact zeros
      continue;
    }
    L(j, j) = std::sqrt(pivot);
    for (int i = j + 1; i < d; ++i) {
      double s = sigma(i, j) - L.row(i).head(j).dot(L.row(j).head(j));
      L(i, j) = s / L(j, j);
    }
  }
  return L;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_(stream_id) {
  std::uint64_t sm = seed ^ (0x6a09e667f3bcc909ULL + stream_id * 0x2545f4914f6cdd1dULL);
  for (auto& w : s_) w = splitmix64(sm);
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::next_uniform() {
  // 53-bit mantissa, shifted into (0,1)
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::next_normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * M_PI * u2;
  cached_ = r * std::sin(a);
  has_cached_ = true;
  return r * std::cos(a);
}

MatrixXd mvn_sample(const MatrixXd& chol_lower, int n, RngStream& rng) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  const int d = static_cast<int>(chol_lower.rows());
  MatrixXd z(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) z(i, j) = rng.next_normal();
  return z * chol_lower.transpose();
}

}  // namespace pret
