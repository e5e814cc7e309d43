#pragma once

#include <cstdint>
#include <random>

namespace rmix {

/// Independent pseudo-random stream. One per chain (or per chain role); never shared
/// across threads. Identical (seed, stream_id, substream) triples give bitwise-identical
/// draw sequences. The transforms are written out here rather than taken from the
/// implementation-defined std:: distributions.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t substream = 0);

  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Standard normal (Marsaglia polar method).
  double normal();
  /// Standard exponential.
  double exponential();

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct NormalParams {
  double mean;
  double variance;
};

struct InvGammaParams {
  double shape;
  double scale;
};

double sample_normal(double mean, double variance, RngStream& rng);
inline double sample_normal(const NormalParams& p, RngStream& rng) {
  return sample_normal(p.mean, p.variance, rng);
}

/// Exact draw from N(mean, variance) restricted to (lo, hi). Uses Robert's (1995)
/// normal/uniform/exponential rejection mix, so far tails do not stall.
double sample_truncated_normal(double mean, double variance, double lo, double hi,
                               RngStream& rng);

/// Gamma(shape, rate); Marsaglia-Tsang with the shape < 1 boost done in log space.
double sample_gamma(double shape, double rate, RngStream& rng);
/// log of a Gamma(shape, 1) draw; finite even when shape is tiny.
double sample_log_gamma(double shape, RngStream& rng);

/// Density proportional to x^{-shape-1} exp(-scale/x).
double sample_inverse_gamma(double shape, double scale, RngStream& rng);
inline double sample_inverse_gamma(const InvGammaParams& p, RngStream& rng) {
  return sample_inverse_gamma(p.shape, p.scale, rng);
}

/// Beta(a, b) in the open interval (0, 1); clamped away from the endpoints when a
/// parameter is so small that the draw underflows.
double sample_beta(double a, double b, RngStream& rng);

/// Standard Student-t with nu degrees of freedom.
double sample_student_t(double nu, RngStream& rng);

double logpdf_normal(double x, double mean, double variance);
/// log density of loc + scale * t_nu at x, fully normalized.
double logpdf_student_t(double x, double loc, double scale, double nu);

double normal_cdf(double x);

/// log(exp(a) + exp(b)) without overflow; handles -inf operands.
double log_sum_exp(double a, double b);

}  // namespace rmix
