#include "rmix/location_toy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "rmix/error.hpp"

namespace rmix {

void ToyData::validate() const {
  if (y.empty()) throw InvalidParameter("toy data needs at least one observation");
  if (!(sigma > 0.0) || !(nu > 0.0)) throw InvalidParameter("toy sigma and nu must be positive");
  if (!(theta >= 0.0 && theta <= 1.0)) throw InvalidParameter("toy theta must lie in [0, 1]");
}

ToyData make_toy_data(std::size_t n, bool corrupt_last, RngStream& rng) {
  ToyData d;
  d.y.resize(n);
  for (auto& v : d.y) v = rng.normal();
  if (corrupt_last && n > 0) d.y.back() = 10.0;
  return d;
}

NormalParams gaussian_posterior(const ToyData& data) {
  data.validate();
  double s = 0.0;
  for (double v : data.y) s += v;
  const double n = static_cast<double>(data.size());
  return {s / n, data.sigma * data.sigma / n};
}

double t4_marginal_logdensity(double mu, const ToyData& data) {
  const double c = -0.5 * (data.nu + 1.0);
  const double s2 = data.sigma * data.sigma;
  double total = 0.0;
  for (double v : data.y) {
    const double r = v - mu;
    total += c * std::log1p(r * r / (data.nu * s2));
  }
  return total;
}

double mixture_marginal_logdensity(double mu, const ToyData& data, bool exact_constants) {
  const double log_w_t = std::log(data.theta);
  const double log_w_n = std::log1p(-data.theta);
  const double s2 = data.sigma * data.sigma;
  double total = 0.0;
  for (double v : data.y) {
    const double r = v - mu;
    double lt, ln;
    if (exact_constants) {
      lt = logpdf_student_t(v, mu, data.sigma, data.nu);
      ln = logpdf_normal(v, mu, s2);
    } else {
      lt = -0.5 * (data.nu + 1.0) * std::log1p(r * r / (data.nu * s2));
      ln = -0.5 * r * r / s2;
    }
    total += log_sum_exp(log_w_t + lt, log_w_n + ln);
  }
  return total;
}

double DensityTable::integral() const {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    s += 0.5 * (density[i] + density[i - 1]) * (x[i] - x[i - 1]);
  }
  return s;
}

double DensityTable::mean() const {
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    s += 0.5 * (x[i] * density[i] + x[i - 1] * density[i - 1]) * (x[i] - x[i - 1]);
  }
  return s;
}

double DensityTable::variance() const {
  const double m = mean();
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double a = (x[i] - m) * (x[i] - m) * density[i];
    const double b = (x[i - 1] - m) * (x[i - 1] - m) * density[i - 1];
    s += 0.5 * (a + b) * (x[i] - x[i - 1]);
  }
  return s;
}

double DensityTable::mode() const {
  const auto it = std::max_element(density.begin(), density.end());
  return x[static_cast<std::size_t>(it - density.begin())];
}

double DensityTable::mass(double lo, double hi) const {
  if (x.size() < 2 || !(hi > lo)) return 0.0;
  auto interp = [&](std::size_t i, double at) {
    const double w = (at - x[i - 1]) / (x[i] - x[i - 1]);
    return density[i - 1] + w * (density[i] - density[i - 1]);
  };
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double a = std::max(lo, x[i - 1]);
    const double b = std::min(hi, x[i]);
    if (b <= a) continue;
    s += 0.5 * (interp(i, a) + interp(i, b)) * (b - a);
  }
  return s;
}

void DensityTable::write_csv(std::ostream& out, const char* x_name) const {
  out << x_name << ",density\n";
  out.precision(17);
  for (std::size_t i = 0; i < x.size(); ++i) out << x[i] << ',' << density[i] << '\n';
}

DensityTable grid_posterior(const std::function<double(double)>& logdensity, double lo,
                            double hi, std::size_t points) {
  if (!(lo < hi)) throw InvalidParameter("grid needs lo < hi");
  if (points < 2) throw InvalidParameter("grid needs at least two points");
  DensityTable t;
  t.x.resize(points);
  t.density.resize(points);
  const double step = (hi - lo) / static_cast<double>(points - 1);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points; ++i) {
    t.x[i] = lo + step * static_cast<double>(i);
    t.density[i] = logdensity(t.x[i]);
    top = std::max(top, t.density[i]);
  }
  if (!std::isfinite(top)) throw InvalidParameter("log density is not finite anywhere on the grid");
  for (auto& d : t.density) d = std::exp(d - top);
  const double z = t.integral();
  for (auto& d : t.density) d /= z;
  return t;
}

DensityTable default_toy_grid(const ToyData& data,
                              const std::function<double(double)>& logdensity) {
  const NormalParams g = gaussian_posterior(data);
  const double half = 10.0 * std::sqrt(g.variance);
  return grid_posterior(logdensity, g.mean - half, g.mean + half, 4096);
}

}  // namespace rmix
