#include "rmix/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>

#include "rmix/error.hpp"
#include "rmix/io.hpp"

namespace rmix {

namespace {

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

std::vector<double> autocovariance(std::span<const double> x, std::size_t max_lag) {
  const std::size_t n = x.size();
  const double m = mean_of(x);
  std::vector<double> c(max_lag + 1, 0.0);
  for (std::size_t l = 0; l <= max_lag && l < n; ++l) {
    double s = 0.0;
    for (std::size_t i = 0; i + l < n; ++i) s += (x[i] - m) * (x[i + l] - m);
    c[l] = s / static_cast<double>(n);
  }
  return c;
}

}  // namespace

std::vector<double> autocorrelation(std::span<const double> x, std::size_t max_lag) {
  if (x.empty()) throw InvalidParameter("autocorrelation of an empty sequence");
  const auto c = autocovariance(x, max_lag);
  std::vector<double> rho(max_lag + 1, 0.0);
  rho[0] = 1.0;
  if (c[0] <= 0.0) return rho;
  for (std::size_t l = 1; l <= max_lag; ++l) rho[l] = c[l] / c[0];
  return rho;
}

double effective_sample_size(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) return static_cast<double>(n);
  const double m = mean_of(x);
  double c0 = 0.0;
  for (double v : x) c0 += (v - m) * (v - m);
  c0 /= static_cast<double>(n);
  if (!(c0 > 1e-300)) return 0.0;

  // Lags are computed on demand in pairs; the sum stops at the first negative pair.
  auto rho = [&](std::size_t l) {
    double s = 0.0;
    for (std::size_t i = 0; i + l < n; ++i) s += (x[i] - m) * (x[i + l] - m);
    return s / static_cast<double>(n) / c0;
  };
  double tau = -1.0;  // pairs start at (rho0, rho1): tau = -1 + 2 sum Gamma_k
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double gamma = (k == 0 ? 1.0 : rho(2 * k)) + rho(2 * k + 1);
    if (gamma <= 0.0) break;
    tau += 2.0 * gamma;
  }
  if (tau <= 0.0) tau = 1.0 / static_cast<double>(n);
  return static_cast<double>(n) / tau;
}

double quantile_type7(std::vector<double> x, double p) {
  if (x.empty()) throw InvalidParameter("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidParameter("quantile level must lie in [0, 1]");
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

SummaryRow summarize(const std::string& parameter,
                     const std::vector<std::vector<double>>& per_chain,
                     std::optional<double> generative, std::optional<double> reference_mse,
                     std::optional<double> cpu_seconds) {
  if (per_chain.empty()) throw InvalidParameter("summarize needs at least one chain");
  SummaryRow row;
  row.parameter = parameter;
  std::vector<double> means;
  std::vector<double> pooled;
  for (const auto& c : per_chain) {
    if (c.empty()) throw InvalidParameter("summarize: empty chain");
    means.push_back(mean_of(c));
    pooled.insert(pooled.end(), c.begin(), c.end());
    row.ess += effective_sample_size(c);
  }
  row.mean = mean_of(means);
  if (means.size() > 1) {
    double ss = 0.0;
    for (double m : means) ss += (m - row.mean) * (m - row.mean);
    row.mc_error = std::sqrt(ss / static_cast<double>(means.size() - 1));
  }
  if (generative) {
    row.bias = std::abs(row.mean - *generative);
    row.mse = *row.bias * *row.bias + row.mc_error * row.mc_error;
    if (reference_mse && *row.mse > 0.0) row.mse_ratio = *reference_mse / *row.mse;
  }
  std::sort(pooled.begin(), pooled.end());
  row.interval_lo = quantile_type7(pooled, 0.025);
  row.interval_hi = quantile_type7(pooled, 0.975);
  row.cpu_seconds = cpu_seconds;
  return row;
}

KdeGrid kde_grid(std::span<const double> x, std::size_t points) {
  if (x.empty()) throw InvalidParameter("KDE of an empty sample");
  if (points < 2) throw InvalidParameter("KDE needs at least two grid points");
  KdeGrid grid;
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) {
    grid.x = {sorted.front()};
    grid.density = {1.0};
    return grid;
  }
  const double n = static_cast<double>(sorted.size());
  const double m = mean_of(sorted);
  double ss = 0.0;
  for (double v : sorted) ss += (v - m) * (v - m);
  const double sd = std::sqrt(ss / (n - 1.0));
  const double iqr = quantile_type7(sorted, 0.75) - quantile_type7(sorted, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  const double h = 0.9 * spread * std::pow(n, -0.2);
  grid.bandwidth = h;

  const double lo = sorted.front() - 3.0 * h;
  const double hi = sorted.back() + 3.0 * h;
  const double step = (hi - lo) / static_cast<double>(points - 1);
  const double norm = 1.0 / (n * h * std::sqrt(2.0 * std::numbers::pi));
  grid.x.resize(points);
  grid.density.resize(points);
  // Kernels are cut at 8 bandwidths (relative error below 1e-14); sorted samples turn
  // the window into a two-pointer sweep.
  std::size_t first = 0;
  for (std::size_t g = 0; g < points; ++g) {
    const double gx = lo + step * static_cast<double>(g);
    while (first < sorted.size() && sorted[first] < gx - 8.0 * h) ++first;
    double d = 0.0;
    for (std::size_t i = first; i < sorted.size() && sorted[i] <= gx + 8.0 * h; ++i) {
      const double u = (gx - sorted[i]) / h;
      d += std::exp(-0.5 * u * u);
    }
    grid.x[g] = gx;
    grid.density[g] = d * norm;
  }
  return grid;
}

void write_density_csv(std::ostream& out, const KdeGrid& grid, const std::string& x_name) {
  out << x_name << ",density\n";
  for (std::size_t g = 0; g < grid.x.size(); ++g) {
    out << format_double(grid.x[g]) << ',' << format_double(grid.density[g]) << '\n';
  }
}

double density_mode(std::span<const double> x) {
  const KdeGrid grid = kde_grid(x, 512);
  const auto best = std::max_element(grid.density.begin(), grid.density.end());
  return grid.x[static_cast<std::size_t>(best - grid.density.begin())];
}

double total_variation_histogram(std::span<const double> a, std::span<const double> b,
                                 std::size_t bins) {
  if (a.empty() || b.empty()) throw InvalidParameter("total variation of an empty sample");
  std::vector<double> all(a.begin(), a.end());
  all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  const double lo = quantile_type7(all, 0.001);
  const double hi = quantile_type7(all, 0.999);
  if (!(hi > lo)) return 0.0;
  auto histogram = [&](std::span<const double> x) {
    std::vector<double> h(bins + 2, 0.0);  // two outer bins catch the tails
    for (double v : x) {
      std::size_t k;
      if (v < lo) {
        k = 0;
      } else if (v >= hi) {
        k = bins + 1;
      } else {
        k = 1 + std::min(bins - 1, static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins)));
      }
      h[k] += 1.0 / static_cast<double>(x.size());
    }
    return h;
  };
  const auto ha = histogram(a);
  const auto hb = histogram(b);
  double tv = 0.0;
  for (std::size_t k = 0; k < ha.size(); ++k) tv += std::abs(ha[k] - hb[k]);
  return 0.5 * tv;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows,
                       const std::vector<std::string>& labels, const std::string& label_header) {
  const bool any_ratio = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.mse_ratio.has_value(); });
  out << (labels.empty() ? "" : label_header + ",")
      << "parameter,mean,mc_error,bias,mse" << (any_ratio ? ",mse_ratio" : "")
      << ",interval_lo,interval_hi,interval_length,ess,cpu_seconds\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (!labels.empty()) out << labels[i] << ',';
    out << r.parameter << ',' << format_double(r.mean) << ',' << format_double(r.mc_error) << ','
        << opt(r.bias) << ',' << opt(r.mse);
    if (any_ratio) out << ',' << opt(r.mse_ratio);
    out << ',' << format_double(r.interval_lo) << ',' << format_double(r.interval_hi) << ','
        << format_double(r.interval_length()) << ',' << format_double(r.ess) << ','
        << opt(r.cpu_seconds) << '\n';
  }
}

void write_acf_csv(std::ostream& out, const std::vector<double>& rho) {
  out << "lag,rho\n";
  for (std::size_t l = 0; l < rho.size(); ++l) out << l << ',' << format_double(rho[l]) << '\n';
}

}  // namespace rmix
