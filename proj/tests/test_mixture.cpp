#include <doctest.h>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>

#include "rmix/error.hpp"
#include "rmix/mixture.hpp"
#include "support.hpp"

using namespace rmix;
using rmix::testing::ks_critical;
using rmix::testing::ks_statistic;
using rmix::testing::rel_err;
namespace bm = boost::math;
using big = boost::multiprecision::cpp_bin_float_50;

namespace {

// Normal density evaluated at 50 digits.
big normal_pdf_big(big x, big var) {
  return exp(-x * x / (2 * var)) / sqrt(2 * boost::math::constants::pi<big>() * var);
}

double ig_logpdf(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

}  // namespace

TEST_CASE("variant codes round-trip") {
  for (auto v : {ErrorVariant::Gaussian, ErrorVariant::StudentT, ErrorVariant::GaussianMixture,
                 ErrorVariant::ProposedMixture}) {
    CHECK(parse_variant(variant_code(v)) == v);
  }
  CHECK_THROWS_AS(parse_variant("N+t"), InvalidParameter);
}

TEST_CASE("gating matrix") {
  MixtureConfig c;
  c.variant = ErrorVariant::Gaussian;
  CHECK(!c.samples_indicators());
  CHECK(!c.samples_theta());
  CHECK(!c.samples_alpha());
  CHECK(!c.samples_nu());
  c.variant = ErrorVariant::StudentT;
  CHECK(!c.samples_indicators());
  CHECK(!c.samples_theta());
  CHECK(c.samples_alpha());
  CHECK(c.samples_nu());
  c.variant = ErrorVariant::GaussianMixture;
  c.fixed_alpha = 10.0;
  CHECK(c.samples_indicators());
  CHECK(c.samples_theta());
  CHECK(!c.samples_alpha());
  CHECK(!c.samples_nu());
  c.variant = ErrorVariant::ProposedMixture;
  c.fixed_alpha.reset();
  CHECK(c.samples_indicators());
  CHECK(c.samples_theta());
  CHECK(c.samples_alpha());
  CHECK(c.samples_nu());
}

TEST_CASE("config validation") {
  MixtureConfig c;
  c.variant = ErrorVariant::GaussianMixture;
  CHECK_THROWS_AS(c.validate(), InvalidParameter);  // nn without alpha
  c.fixed_alpha = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidParameter);
  c.fixed_alpha = 20.0;
  CHECK_NOTHROW(c.validate());
  MixtureConfig d;
  d.m = 1.0;
  CHECK_THROWS_AS(d.validate(), InvalidParameter);
  const auto u = MixtureConfig::uniform_prior(ErrorVariant::ProposedMixture);
  CHECK(u.k * u.m == 1.0);
  CHECK(u.k * (1.0 - u.m) == 1.0);
}

TEST_CASE("indicator probability matches a 50-digit oracle") {
  struct Case {
    double r, V, alpha, theta;
  };
  for (const Case c : {Case{0.1, 1.0, 3.0, 0.01}, Case{5.0, 2.0, 40.0, 0.2}, Case{-30.0, 0.5, 15.0, 0.01},
                       Case{0.0, 1.0, 1.0, 0.5}, Case{1e-3, 7.7, 1e4, 0.9}}) {
    CAPTURE(c.r);
    const big t = c.theta;
    const big inflated = t * normal_pdf_big(c.r, big(c.alpha) * big(c.V));
    const big plain = (1 - t) * normal_pdf_big(c.r, big(c.V));
    const double oracle = static_cast<double>(inflated / (inflated + plain));
    CHECK(rel_err(indicator_probability(c.r, c.V, c.alpha, c.theta), oracle) < 1e-12);
  }
  // Far tail: the Gaussian component underflows in double but the answer is 1.
  CHECK(indicator_probability(1e3, 1.0, 10.0, 0.01) == doctest::Approx(1.0));
}

TEST_CASE("indicator draws follow the Bernoulli probability") {
  RngStream rng(3, 1);
  const double p = indicator_probability(2.5, 1.0, 9.0, 0.1);
  int ones = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) ones += update_indicator(2.5, 1.0, 9.0, 0.1, rng);
  CHECK(std::abs(ones / double(n) - p) < 5.0 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("theta conditional is the stated Beta") {
  RngStream rng(4, 1);
  const std::vector<std::uint8_t> z{1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0};
  const double k = 12.0, m = 0.01;
  std::vector<double> x(40000);
  for (auto& v : x) v = update_theta(z, k, m, rng);
  const bm::beta_distribution<> d(k * m + 3.0, k * (1 - m) + 9.0);
  CHECK(ks_statistic(x, [&](double v) { return bm::cdf(d, v); }) < ks_critical(x.size()));
}

TEST_CASE("alpha conditional: log-density differences match likelihood times prior") {
  // For z = 1, p(alpha | r) is proportional to N(r; 0, alpha V) IG(alpha; nu/2, nu/2).
  const double r = 3.1, V = 1.7, nu = 4.5;
  const double shape = 0.5 * (nu + 1.0), scale = 0.5 * (nu + r * r / V);
  auto direct = [&](double a) { return std::log(bm::pdf(bm::inverse_gamma_distribution<>(0.5 * nu, 0.5 * nu), a)) - 0.5 * std::log(2 * M_PI * a * V) - r * r / (2 * a * V); };
  for (double a : {0.3, 2.0, 11.0}) {
    CHECK(rel_err(direct(a) - direct(1.0), ig_logpdf(a, shape, scale) - ig_logpdf(1.0, shape, scale)) < 1e-10);
  }
  RngStream rng(5, 1);
  std::vector<double> x(40000);
  for (auto& v : x) v = update_alpha(r, V, 1, nu, rng);
  const bm::inverse_gamma_distribution<> d(shape, scale);
  CHECK(ks_statistic(x, [&](double v) { return bm::cdf(d, v); }) < ks_critical(x.size()));
  // z = 0: alpha is a prior draw.
  for (auto& v : x) v = update_alpha(r, V, 0, nu, rng);
  const bm::inverse_gamma_distribution<> prior(0.5 * nu, 0.5 * nu);
  CHECK(ks_statistic(x, [&](double v) { return bm::cdf(prior, v); }) < ks_critical(x.size()));
}

TEST_CASE("nu log conditional equals the product of inverse-gamma priors") {
  const std::vector<double> alpha{0.4, 1.3, 2.2, 0.9, 7.5};
  auto direct = [&](double nu) {
    double s = 0.0;
    for (double a : alpha) s += ig_logpdf(a, 0.5 * nu, 0.5 * nu);
    return s;
  };
  for (double nu : {1.5, 4.0, 17.0, 39.0}) {
    CHECK(rel_err(nu_log_conditional(alpha, nu) - nu_log_conditional(alpha, 4.0), direct(nu) - direct(4.0)) < 1e-10);
  }
  CHECK(nu_log_conditional(alpha, 0.99) == -INFINITY);
  CHECK(nu_log_conditional(alpha, 40.01) == -INFINITY);
}

TEST_CASE("nu Metropolis-Hastings leaves its conditional invariant") {
  const std::vector<double> alpha{0.4, 1.3, 2.2, 0.9, 7.5, 0.2, 3.3, 1.1};
  auto density = [&](double nu) { return std::exp(nu_log_conditional(alpha, nu)); };
  const double z = bm::quadrature::gauss_kronrod<double, 61>::integrate(density, 1.0, 40.0, 15, 1e-12);
  const double mean = bm::quadrature::gauss_kronrod<double, 61>::integrate(
                          [&](double nu) { return nu * density(nu); }, 1.0, 40.0, 15, 1e-12) / z;
  RngStream rng(6, 1);
  double nu = 4.0, sum = 0.0;
  const int n = 400000;
  for (int i = 0; i < n; ++i) {
    nu = update_nu_mh(alpha, nu, 0.8, rng).value;
    sum += nu;
  }
  CHECK(sum / n == doctest::Approx(mean).epsilon(0.02));
}

TEST_CASE("outlier sweep honours the gating") {
  const std::vector<double> resid{0.1, -0.3, 8.0, 0.2};
  const std::vector<double> V{1.0, 1.0, 1.0, 1.0};
  RngStream rng(7, 1);

  MixtureConfig g;
  g.variant = ErrorVariant::Gaussian;
  auto s = OutlierLatentState::initial(4, g);
  for (int i = 0; i < 50; ++i) CHECK(!update_outlier_state(s, resid, V, g, 0.5, rng).has_value());
  for (auto z : s.z) CHECK(z == 0);
  for (auto a : s.alpha) CHECK(a == 1.0);
  CHECK(s.theta == 0.01);

  MixtureConfig t;
  t.variant = ErrorVariant::StudentT;
  s = OutlierLatentState::initial(4, t);
  bool nu_moved = false;
  for (int i = 0; i < 50; ++i) {
    const double before = s.nu;
    CHECK(update_outlier_state(s, resid, V, t, 0.5, rng).has_value());
    nu_moved |= s.nu != before;
  }
  for (auto z : s.z) CHECK(z == 1);
  CHECK(s.theta == 0.01);
  CHECK(nu_moved);

  MixtureConfig nn;
  nn.variant = ErrorVariant::GaussianMixture;
  nn.fixed_alpha = 25.0;
  s = OutlierLatentState::initial(4, nn);
  for (int i = 0; i < 50; ++i) CHECK(!update_outlier_state(s, resid, V, nn, 0.5, rng).has_value());
  for (auto a : s.alpha) CHECK(a == 25.0);
  CHECK(s.nu == 4.0);
  CHECK(s.theta != 0.01);

  MixtureConfig zero;
  zero.fixed_theta = 0.0;
  s = OutlierLatentState::initial(4, zero);
  for (int i = 0; i < 50; ++i) update_outlier_state(s, resid, V, zero, 0.5, rng);
  for (auto z : s.z) CHECK(z == 0);
}

TEST_CASE("mixture loss: continuity, closed k = 2 form, dominance by Huber") {
  for (double k : {0.5, 2.0, 3.0}) {
    for (double nu : {1.0, 4.0, 30.0}) {
      const double below = std::nextafter(k, 0.0);
      CHECK(std::abs(mixture_loss(k, k, nu) - 0.5 * k * k) < 1e-12);
      CHECK(std::abs(mixture_loss(below, k, nu) - mixture_loss(k, k, nu)) < 1e-12);
    }
  }
  for (double x : {2.0, 2.5, -3.0, 10.0, 100.0}) {
    const double closed = 2.5 * std::log(1.0 + x * x / 4.0) - 2.5 * std::log(2.0) + 2.0;
    CHECK(mixture_loss(x, 2.0, 4.0) == doctest::Approx(closed).epsilon(1e-14));
  }
  for (double x : {0.0, 0.7, -1.99}) CHECK(mixture_loss(x, 2.0, 4.0) == 0.5 * x * x);
  for (double x = 2.0; x < 200.0; x *= 1.05) {
    CHECK(mixture_loss(x, 2.0, 4.0) <= huber_loss(x, 2.0) + 1e-15);
    if (x > 2.0) CHECK(mixture_loss(x, 2.0, 4.0) < huber_loss(x, 2.0));
  }
  CHECK(huber_loss(3.0, 2.0) == 4.0);
  CHECK_THROWS_AS(mixture_loss(1.0, 0.0, 4.0), InvalidParameter);
}
