#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rmix/diagnostics.hpp"
#include "rmix/dists.hpp"

using namespace rmix;

namespace {

std::vector<double> ar1(std::size_t n, double phi, std::uint64_t stream) {
  RngStream rng(99, stream);
  std::vector<double> x(n);
  double v = rng.normal() / std::sqrt(1.0 - phi * phi);
  for (auto& xi : x) {
    xi = v;
    v = phi * v + rng.normal();
  }
  return x;
}

}  // namespace

TEST_CASE("AR(1) autocorrelation and ESS") {
  const double phi = 0.6;
  double ess_sum = 0.0;
  const int reps = 20;
  const std::size_t n = 20000;
  for (int r = 0; r < reps; ++r) {
    const auto x = ar1(n, phi, 10 + r);
    const auto rho = autocorrelation(x, 5);
    CHECK(rho[0] == 1.0);
    for (std::size_t l = 1; l <= 5; ++l) CHECK(std::abs(rho[l] - std::pow(phi, double(l))) < 0.05);
    ess_sum += effective_sample_size(x);
  }
  const double expected = double(n) * (1 - phi) / (1 + phi);
  CHECK(std::abs(ess_sum / reps / expected - 1.0) < 0.05);
}

TEST_CASE("white noise has ESS near n") {
  RngStream rng(5, 1);
  std::vector<double> x(10000);
  for (auto& v : x) v = rng.normal();
  const double ess = effective_sample_size(x);
  CHECK(ess > 8500);
  CHECK(ess < 11500);
}

TEST_CASE("constant sequence") {
  const std::vector<double> c(100, 3.5);
  CHECK(effective_sample_size(c) == 0.0);
  const auto rho = autocorrelation(c, 3);
  CHECK(rho[0] == 1.0);
  CHECK(rho[1] == 0.0);
  CHECK(density_mode(c) == 3.5);
}

TEST_CASE("autocorrelation is invariant under affine maps") {
  const auto x = ar1(3000, 0.4, 3);
  std::vector<double> y(x.size());
  std::transform(x.begin(), x.end(), y.begin(), [](double v) { return -2.5 * v + 7.0; });
  const auto a = autocorrelation(x, 20), b = autocorrelation(y, 20);
  for (std::size_t l = 0; l <= 20; ++l) CHECK(a[l] == doctest::Approx(b[l]).epsilon(1e-10));
}

TEST_CASE("type-7 quantiles") {
  const std::vector<double> x{4.0, 1.0, 3.0, 2.0, 5.0};
  CHECK(quantile_type7(x, 0.0) == 1.0);
  CHECK(quantile_type7(x, 1.0) == 5.0);
  CHECK(quantile_type7(x, 0.5) == 3.0);
  CHECK(quantile_type7(x, 0.1) == doctest::Approx(1.4));
  CHECK(quantile_type7(x, 0.975) == doctest::Approx(4.9));
}

TEST_CASE("summarize") {
  const auto r = summarize("p", {{1.0, 1.0}, {3.0, 3.0}}, 0.5);
  CHECK(r.mean == 2.0);
  CHECK(r.mc_error == doctest::Approx(std::sqrt(2.0)));
  CHECK(*r.bias == doctest::Approx(1.5));
  CHECK(*r.mse == doctest::Approx(2.25 + 2.0));
  CHECK_FALSE(r.mse_ratio.has_value());

  const auto w = summarize("p", {{1.0, 1.0}, {3.0, 3.0}}, 0.5, 8.5);
  CHECK(*w.mse_ratio == doctest::Approx(2.0));

  // log A posterior mean 2.078 against log(0.722): bias 2.404 to three decimals.
  const auto t = summarize("log_A", {{2.078}}, std::log(0.722));
  CHECK(std::round(*t.bias * 1000) / 1000 == doctest::Approx(2.404));
}

TEST_CASE("summarize ignores chain order") {
  std::vector<std::vector<double>> chains;
  for (int k = 0; k < 4; ++k) chains.push_back(ar1(500, 0.3, 40 + k));
  const auto a = summarize("p", chains, 0.1);
  std::reverse(chains.begin(), chains.end());
  const auto b = summarize("p", chains, 0.1);
  CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-14));
  CHECK(a.mc_error == doctest::Approx(b.mc_error).epsilon(1e-12));
  CHECK(a.interval_lo == b.interval_lo);
  CHECK(a.interval_hi == b.interval_hi);
  CHECK(a.ess == doctest::Approx(b.ess).epsilon(1e-12));
}

TEST_CASE("density mode") {
  RngStream rng(8, 2);
  std::vector<double> x(20000);
  for (auto& v : x) v = 5.0 + rng.normal();
  CHECK(std::abs(density_mode(x) - 5.0) < 0.15);

  std::vector<double> bi;
  for (int i = 0; i < 6000; ++i) bi.push_back(-3.0 + 0.5 * rng.normal());
  for (int i = 0; i < 3000; ++i) bi.push_back(3.0 + 0.5 * rng.normal());
  CHECK(std::abs(density_mode(bi) + 3.0) < 0.2);

  const auto g = kde_grid(x);
  CHECK(g.x.size() == 512);
  const double h = g.x[1] - g.x[0];
  const double mass = std::accumulate(g.density.begin(), g.density.end(), 0.0) * h;
  CHECK(std::abs(mass - 1.0) < 0.01);
}

TEST_CASE("histogram total variation") {
  RngStream rng(12, 1);
  std::vector<double> a(50000), b(50000), c(50000);
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  for (auto& v : c) v = 10.0 + rng.normal();
  CHECK(total_variation_histogram(a, b) < 0.03);
  CHECK(total_variation_histogram(a, c) > 0.99);
  CHECK(total_variation_histogram(a, a) == 0.0);
}

TEST_CASE("summary csv adds mse_ratio only when present") {
  std::ostringstream plain, ratio;
  const auto r = summarize("beta", {{1.0, 2.0}, {1.5, 2.5}}, 0.0);
  write_summary_csv(plain, {r});
  CHECK(plain.str().find("mse_ratio") == std::string::npos);
  const auto w = summarize("beta", {{1.0, 2.0}, {1.5, 2.5}}, 0.0, 1.0);
  write_summary_csv(ratio, {r, w}, {"t", "nt"});
  CHECK(ratio.str().find("mse_ratio") != std::string::npos);
  CHECK(ratio.str().rfind("variant,", 0) == 0);
}
