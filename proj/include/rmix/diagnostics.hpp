#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rmix {

/// rho(l) = c(l) / c(0) for l = 0..max_lag, autocovariances about the sample mean with
/// divisor n. A constant sequence gives rho(0) = 1 and zeros elsewhere.
std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag);

/// n / (1 + 2 sum rho(l)), truncated by Geyer's initial positive sequence.
/// 0 for a constant sequence.
double effective_sample_size(std::span<const double> x);

/// Type-7 (linear interpolation) sample quantile; p in [0, 1].
double quantile_type7(std::vector<double> x, double p);

struct SummaryRow {
  std::string parameter;
  double mean = 0.0;
  double mc_error = 0.0;
  std::optional<double> bias;
  std::optional<double> mse;
  std::optional<double> mse_ratio;
  double interval_lo = 0.0;
  double interval_hi = 0.0;
  double ess = 0.0;
  std::optional<double> cpu_seconds;

  double interval_length() const { return interval_hi - interval_lo; }
};

/// Mean of per-chain means, their SD as the Monte Carlo error, |mean - generative| as
/// bias, bias^2 + error^2 as MSE, and reference_mse / mse as the ratio. The 95% interval
/// uses pooled type-7 quantiles; ess is the sum of per-chain ESS.
SummaryRow summarize(const std::string& parameter,
                     const std::vector<std::vector<double>>& per_chain,
                     std::optional<double> generative = std::nullopt,
                     std::optional<double> reference_mse = std::nullopt,
                     std::optional<double> cpu_seconds = std::nullopt);

/// Gaussian KDE with Silverman's bandwidth on `points` grid values over
/// [min - 3h, max + 3h]. A constant sample gives a single grid point with density 1.
struct KdeGrid {
  std::vector<double> x;
  std::vector<double> density;
  double bandwidth = 0.0;
};
KdeGrid kde_grid(std::span<const double> x, std::size_t points = 512);
void write_density_csv(std::ostream& out, const KdeGrid& grid, const std::string& x_name);

/// Argmax of a Gaussian KDE with Silverman's bandwidth on 512 points over
/// [min - 3h, max + 3h].
double density_mode(std::span<const double> x);

/// Total variation distance between two sample sets via a shared histogram.
double total_variation_histogram(std::span<const double> a, std::span<const double> b,
                                 std::size_t bins = 60);

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows,
                       const std::vector<std::string>& labels = {},
                       const std::string& label_header = "variant");
void write_acf_csv(std::ostream& out, const std::vector<double>& rho);

}  // namespace rmix
