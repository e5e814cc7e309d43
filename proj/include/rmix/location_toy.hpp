#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "rmix/dists.hpp"

namespace rmix {

/// Location model y_i = mu + e_i with a flat prior on mu and known error settings.
struct ToyData {
  std::vector<double> y;
  double sigma = 1.0;
  double nu = 4.0;
  double theta = 0.1;

  void validate() const;
  std::size_t size() const { return y.size(); }
};

/// n draws of N(0, 1); with corrupt_last the final value is recorded as 10.
ToyData make_toy_data(std::size_t n, bool corrupt_last, RngStream& rng);

/// Posterior of mu under Gaussian errors: N(ybar, sigma^2 / n).
NormalParams gaussian_posterior(const ToyData& data);

/// sum_i -(nu + 1) / 2 log(1 + (y_i - mu)^2 / (nu sigma^2)), unnormalized.
double t4_marginal_logdensity(double mu, const ToyData& data);

/// Mixture-error marginal of mu with alpha and z integrated out.
/// exact_constants = false keeps the proportional form that drops each component's own
/// normalizing constant: log[theta (1 + r^2/nu)^{-(nu+1)/2} + (1 - theta) exp(-r^2/2)].
/// exact_constants = true uses fully normalized t and Gaussian densities, which is the
/// density the sampler targets.
double mixture_marginal_logdensity(double mu, const ToyData& data, bool exact_constants);

/// Trapezoid-normalized density on a uniform grid.
struct DensityTable {
  std::vector<double> x;
  std::vector<double> density;

  double step() const { return x.size() > 1 ? x[1] - x[0] : 0.0; }
  double integral() const;
  double mean() const;
  double variance() const;
  double mode() const;
  /// Probability mass in [lo, hi) from trapezoid integration with linear interpolation.
  double mass(double lo, double hi) const;
  void write_csv(std::ostream& out, const char* x_name = "mu") const;
};

DensityTable grid_posterior(const std::function<double(double)>& logdensity, double lo,
                            double hi, std::size_t points);

/// Grid posterior over ybar +/- 10 standard errors at 4096 points.
DensityTable default_toy_grid(const ToyData& data,
                              const std::function<double(double)>& logdensity);

}  // namespace rmix
