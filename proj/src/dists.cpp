#include "rmix/dists.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "rmix/error.hpp"

namespace rmix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InvalidParameter(std::string(what) + " must be positive and finite, got " +
                           std::to_string(value));
  }
}

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) {
    throw InvalidParameter(std::string(what) + " must be finite");
  }
}

// Standard normal restricted to (a, b) with a >= 0 (b may be +inf).
double right_tail_standard(double a, double b, RngStream& rng) {
  const double root = std::sqrt(a * a + 4.0);
  const double rate = 0.5 * (a + root);
  // Robert's switch between uniform and exponential proposals.
  const double uniform_limit = a + 2.0 / (a + root) * std::exp(0.5 + 0.25 * (a * a - a * root));
  if (b <= uniform_limit) {
    for (;;) {
      const double z = a + (b - a) * rng.uniform();
      if (!(z > a && z < b)) continue;
      if (std::log(rng.uniform()) <= 0.5 * (a * a - z * z)) return z;
    }
  }
  for (;;) {
    const double z = a + rng.exponential() / rate;
    if (!(z > a && z < b)) continue;
    const double d = z - rate;
    if (std::log(rng.uniform()) <= -0.5 * d * d) return z;
  }
}

// Standard normal restricted to (a, b) with a < 0 < b.
double central_standard(double a, double b, RngStream& rng) {
  if (b - a >= std::sqrt(2.0 * std::numbers::pi)) {
    for (;;) {
      const double z = rng.normal();
      if (z > a && z < b) return z;
    }
  }
  for (;;) {
    const double z = a + (b - a) * rng.uniform();
    if (!(z > a && z < b)) continue;
    if (std::log(rng.uniform()) <= -0.5 * z * z) return z;
  }
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t substream)
    : seed_(seed), stream_id_(stream_id) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(stream_id), hi(stream_id), lo(substream), hi(substream)};
  engine_.seed(seq);
}

double RngStream::uniform() {
  // 53 random bits, centred in their cell so 0 and 1 are never returned.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  for (;;) {
    const double u = 2.0 * uniform() - 1.0;
    const double v = 2.0 * uniform() - 1.0;
    const double s = u * u + v * v;
    if (s >= 1.0 || s == 0.0) continue;
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }
}

double RngStream::exponential() { return -std::log(uniform()); }

double sample_normal(double mean, double variance, RngStream& rng) {
  require_finite(mean, "normal mean");
  require_positive(variance, "normal variance");
  return mean + std::sqrt(variance) * rng.normal();
}

double sample_truncated_normal(double mean, double variance, double lo, double hi,
                               RngStream& rng) {
  require_finite(mean, "truncated normal mean");
  require_positive(variance, "truncated normal variance");
  if (std::isnan(lo) || std::isnan(hi) || !(lo < hi)) {
    throw InvalidParameter("truncated normal requires lo < hi");
  }
  const double sd = std::sqrt(variance);
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  for (;;) {
    double z;
    if (a == -kInf && b == kInf) {
      z = rng.normal();
    } else if (a >= 0.0) {
      z = right_tail_standard(a, b, rng);
    } else if (b <= 0.0) {
      z = -right_tail_standard(-b, -a, rng);
    } else {
      z = central_standard(a, b, rng);
    }
    const double x = mean + sd * z;
    // Rounding of mean + sd * z can land on a bound when the interval is tiny.
    if (x > lo && x < hi) return x;
  }
}

double sample_log_gamma(double shape, RngStream& rng) {
  require_positive(shape, "gamma shape");
  if (shape < 1.0) {
    return sample_log_gamma(shape + 1.0, rng) + std::log(rng.uniform()) / shape;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double x = rng.normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = rng.uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
      return std::log(d) + std::log(v);
    }
  }
}

double sample_gamma(double shape, double rate, RngStream& rng) {
  require_positive(rate, "gamma rate");
  return std::exp(sample_log_gamma(shape, rng)) / rate;
}

double sample_inverse_gamma(double shape, double scale, RngStream& rng) {
  require_positive(shape, "inverse-gamma shape");
  require_positive(scale, "inverse-gamma scale");
  return scale * std::exp(-sample_log_gamma(shape, rng));
}

double sample_beta(double a, double b, RngStream& rng) {
  require_positive(a, "beta a");
  require_positive(b, "beta b");
  const double la = sample_log_gamma(a, rng);
  const double lb = sample_log_gamma(b, rng);
  // x = Ga / (Ga + Gb) evaluated from the log draws.
  const double x = 1.0 / (1.0 + std::exp(lb - la));
  constexpr double kLo = std::numeric_limits<double>::min();
  constexpr double kHi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
  if (x < kLo) return kLo;
  if (x > kHi) return kHi;
  return x;
}

double sample_student_t(double nu, RngStream& rng) {
  require_positive(nu, "student-t degrees of freedom");
  const double z = rng.normal();
  const double chi2 = 2.0 * std::exp(sample_log_gamma(0.5 * nu, rng));
  return z / std::sqrt(chi2 / nu);
}

double logpdf_normal(double x, double mean, double variance) {
  require_positive(variance, "normal variance");
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

double logpdf_student_t(double x, double loc, double scale, double nu) {
  require_positive(scale, "student-t scale");
  require_positive(nu, "student-t degrees of freedom");
  const double r = (x - loc) / scale;
  return boost::math::lgamma(0.5 * (nu + 1.0)) - boost::math::lgamma(0.5 * nu) -
         0.5 * std::log(nu * std::numbers::pi) - std::log(scale) -
         0.5 * (nu + 1.0) * std::log1p(r * r / nu);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = a > b ? a : b;
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace rmix
