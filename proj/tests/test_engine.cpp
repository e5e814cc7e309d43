#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "rmix/engine.hpp"
#include "rmix/error.hpp"
#include "rmix/protocols.hpp"

using namespace rmix;

namespace {

ChainConfig short_config(ErrorVariant v, std::size_t n_iter = 3000, std::size_t burn_in = 500) {
  ChainConfig c;
  c.n_iter = n_iter;
  c.burn_in = burn_in;
  c.n_chains = 2;
  c.seed = 11;
  c.mixture.variant = v;
  return c;
}

ModelData table_data() { return paper_dataset_hospital().data; }

}  // namespace

TEST_CASE("thinning keeps floor((n_iter - burn_in) / thin) draws") {
  auto c = short_config(ErrorVariant::ProposedMixture, 1050, 50);
  c.thin = 10;
  CHECK(c.kept_samples() == 100);
  const auto out = run_chain(table_data(), c, 1);
  CHECK(out.kept() == 100);
  for (const auto& col : out.columns) CHECK(col.size() == 100);
  c.thin = 7;
  CHECK(c.kept_samples() == 1000 / 7);
}

TEST_CASE("config validation") {
  ChainConfig c;
  c.burn_in = c.n_iter;
  CHECK_THROWS_AS(c.validate(), InvalidParameter);
  c = ChainConfig{};
  c.thin = 0;
  CHECK_THROWS_AS(c.validate(), InvalidParameter);
  c = ChainConfig{};
  c.n_chains = 0;
  CHECK_THROWS_AS(c.validate(), InvalidParameter);
}

TEST_CASE("same seed and stream give identical chains, different streams differ") {
  const auto c = short_config(ErrorVariant::ProposedMixture);
  const auto a = run_chain(table_data(), c, 1);
  const auto b = run_chain(table_data(), c, 1);
  const auto d = run_chain(table_data(), c, 2);
  CHECK(a.columns == b.columns);
  CHECK(a.z_mean == b.z_mean);
  CHECK(a.columns != d.columns);
}

TEST_CASE("mixture with theta held at zero reproduces the Gaussian chain") {
  auto g = short_config(ErrorVariant::Gaussian);
  auto m = short_config(ErrorVariant::ProposedMixture);
  m.mixture.fixed_theta = 0.0;
  const auto a = run_chain(table_data(), g, 3);
  const auto b = run_chain(table_data(), m, 3);
  CHECK(a.column("beta") == b.column("beta"));
  CHECK(a.column("log_A") == b.column("log_A"));
  for (double z : b.z_mean) CHECK(z == 0.0);
}

TEST_CASE("adaptive scale") {
  AdaptiveScale s;
  s.current = 2.0;
  s.adapting = false;
  CHECK(adapt_scale(s, true, 1).current == 2.0);
  CHECK(adapt_scale(s, false, 5).current == 2.0);

  s.adapting = true;
  double prev = s.current;
  for (std::size_t t = 1; t <= 200; ++t) {
    s = adapt_scale(s, true, t);
    CHECK(s.current > prev);
    prev = s.current;
  }
  AdaptiveScale r;
  r.current = 1.0;
  r = adapt_scale(r, false, 1);
  CHECK(r.current == doctest::Approx(std::exp(-0.35)).epsilon(1e-14));
  r = adapt_scale(r, true, 4);
  CHECK(r.current == doctest::Approx(std::exp(-0.35 + std::pow(4.0, -0.6) * 0.65)).epsilon(1e-14));
}

TEST_CASE("proposal scales freeze at burn-in and acceptance lands near target") {
  auto c = short_config(ErrorVariant::Gaussian, 20000, 5000);
  const auto out = run_chain(table_data(), c, 1);
  REQUIRE(out.acceptance.count("A"));
  CHECK(out.acceptance.at("A") > 0.25);
  CHECK(out.acceptance.at("A") < 0.45);
  const auto again = run_chain(table_data(), c, 1);
  CHECK(out.proposal_scale.at("A") == again.proposal_scale.at("A"));
}

TEST_CASE("ensemble output does not depend on the worker count") {
  auto c = short_config(ErrorVariant::ProposedMixture);
  c.n_chains = 3;
  const auto one = run_ensemble(table_data(), c, 1);
  const auto three = run_ensemble(table_data(), c, 3);
  REQUIRE(one.size() == 3);
  REQUIRE(three.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(one[k].stream_id == k + 1);
    CHECK(one[k].columns == three[k].columns);
    CHECK(one[k].z_mean == three[k].z_mean);
  }
}

TEST_CASE("variant gating") {
  auto c = short_config(ErrorVariant::StudentT, 2000, 200);
  const auto t = run_chain(table_data(), c, 1);
  for (double z : t.z_mean) CHECK(z == 1.0);
  CHECK(t.has_column("nu"));
  CHECK_FALSE(t.has_column("theta"));

  c.mixture.variant = ErrorVariant::GaussianMixture;
  CHECK_THROWS_AS(run_chain(table_data(), c, 1), InvalidParameter);
  c.mixture.fixed_alpha = 15.0;
  const auto nn = run_chain(table_data(), c, 1);
  CHECK(nn.fixed_alpha == 15.0);
  CHECK_FALSE(nn.has_column("nu"));
  CHECK(nn.has_column("theta"));

  c.mixture.variant = ErrorVariant::Gaussian;
  c.mixture.fixed_alpha.reset();
  const auto g = run_chain(table_data(), c, 1);
  CHECK_FALSE(g.has_column("theta"));
  CHECK_FALSE(g.has_column("nu"));
}

TEST_CASE("resolve_mixture fills model defaults") {
  MixtureConfig m;
  m.variant = ErrorVariant::GaussianMixture;
  TimeSeries ts;
  ts.t = {0.0, 1.0, 2.0};
  ts.y = {17.6, 17.7, 17.65};
  ts.V = {1e-4, 1e-4, 1e-4};
  CHECK(resolve_mixture(ModelData{ts}, m).fixed_alpha == 100.0);
  ToyData toy;
  toy.y = {0.1, -0.3, 10.0};
  CHECK_THROWS_AS(resolve_mixture(ModelData{toy}, m), InvalidParameter);
  m.variant = ErrorVariant::ProposedMixture;
  const auto r = resolve_mixture(ModelData{toy}, m);
  CHECK(r.fixed_nu == toy.nu);
  CHECK(r.fixed_theta == toy.theta);
}

TEST_CASE("non-finite state raises ChainDiverged") {
  HierData d;
  const double big = std::numeric_limits<double>::max() / 4;
  d.y = {big, -big, big, -big};
  d.V = {big, big, big, big};
  auto c = short_config(ErrorVariant::Gaussian, 200, 10);
  CHECK_THROWS_AS(run_chain(ModelData{d}, c, 1), ChainDiverged);
}

namespace {

// TV between draws and a distribution, over `bins` bins equiprobable under its CDF.
double tv_equiprobable(const std::vector<double>& draws, const std::function<double(double)>& cdf, std::size_t bins) {
  std::vector<double> count(bins, 0.0);
  for (double d : draws) count[std::min(bins - 1, std::size_t(cdf(d) * double(bins)))] += 1.0;
  double tv = 0.0;
  for (double c : count) tv += std::abs(c / double(draws.size()) - 1.0 / double(bins));
  return 0.5 * tv;
}

}  // namespace

TEST_CASE("Gaussian sweep leaves the marginal posterior of (beta, log A) invariant") {
  const HierData d{{-1.2, 0.4, 2.1}, {0.5, 1.0, 1.5}};
  const HierPrior prior;
  // mu integrated out: y_i ~ N(beta, A + V_i); beta | A is Gaussian, so log A has a 1-D
  // marginal and beta's marginal CDF is a mixture of normal CDFs over the log A grid.
  const double lo = -20.0, h = 0.005;
  const std::size_t na = 10000;
  std::vector<double> la(na), w(na), bm(na), bs(na);
  double wmax = -INFINITY;
  for (std::size_t j = 0; j < na; ++j) {
    la[j] = lo + h * double(j);
    const double A = std::exp(la[j]);
    double prec = 1.0 / prior.beta_variance, lin = 0.0, quad = 0.0, logdet = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      const double v = A + d.V[k];
      prec += 1.0 / v;
      lin += d.y[k] / v;
      quad += d.y[k] * d.y[k] / v;
      logdet += std::log(v);
    }
    bm[j] = lin / prec;
    bs[j] = std::sqrt(1.0 / prec);
    w[j] = -2.0 * std::log(prior.shrink_scale + A) + la[j] - 0.5 * logdet - 0.5 * std::log(prec) -
           0.5 * (quad - lin * lin / prec);
    wmax = std::max(wmax, w[j]);
  }
  double total = 0.0;
  for (auto& v : w) total += (v = std::exp(v - wmax));
  for (auto& v : w) v /= total;
  std::vector<double> cum(na + 1, 0.0);
  for (std::size_t j = 0; j < na; ++j) cum[j + 1] = cum[j] + w[j];
  auto cdf_logA = [&](double x) {
    const double u = (x - lo) / h + 0.5;
    if (u <= 0.0) return 0.0;
    if (u >= double(na)) return 1.0;
    const auto j = std::size_t(u);
    return cum[j] + w[j] * (u - double(j));
  };
  auto cdf_beta = [&](double b) {
    double c = 0.0;
    for (std::size_t j = 0; j < na; ++j) c += w[j] * normal_cdf((b - bm[j]) / bs[j]);
    return c;
  };
  CHECK(w.front() < 1e-12);
  CHECK(w.back() < 1e-9);

  ChainConfig c;
  c.n_iter = 420000;
  c.burn_in = 20000;
  c.n_chains = 1;
  c.seed = 5;
  c.mixture.variant = ErrorVariant::Gaussian;
  const auto out = run_chain(ModelData{d}, c, 1);
  std::vector<double> beta_thin, logA = out.column("log_A");
  for (std::size_t i = 0; i < out.kept(); i += 5) beta_thin.push_back(out.column("beta")[i]);
  const double tv_beta = tv_equiprobable(beta_thin, cdf_beta, 40);
  const double tv_logA = tv_equiprobable(logA, cdf_logA, 40);
  CAPTURE(tv_beta);
  CAPTURE(tv_logA);
  CHECK(tv_beta < 0.03);
  CHECK(tv_logA < 0.03);
}
