#include <doctest.h>

#include <cmath>

#include "rmix/error.hpp"
#include "rmix/ou_model.hpp"
#include "support.hpp"

using namespace rmix;
using rmix::testing::condition_gaussian;
using rmix::testing::log_mvn;
using rmix::testing::rel_err;

namespace {

TimeSeries instance(std::size_t n) {
  TimeSeries d;
  double t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    t += 3.0 + 40.0 * std::abs(std::sin(2.3 * double(i)));
    d.t.push_back(t);
    d.y.push_back(17.6 + 0.03 * std::cos(double(i)));
    d.V.push_back(std::pow(0.01 + 0.004 * double(i), 2));
  }
  return d;
}

OUState state_for(const TimeSeries& d) {
  OUState s;
  s.mu = 17.62;
  s.sigma2 = 0.02 * 0.02;
  s.tau = 90.0;
  for (std::size_t i = 0; i < d.size(); ++i) s.Y.push_back(17.6 + 0.025 * std::sin(1.3 * double(i)));
  return s;
}

Eigen::MatrixXd ou_cov(const TimeSeries& d, double sigma2, double tau) {
  const auto n = Eigen::Index(d.size());
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) c(a, b) = 0.5 * tau * sigma2 * std::exp(-std::abs(d.t[a] - d.t[b]) / tau);
  }
  return c;
}

Eigen::VectorXd as_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
}

double ig_logpdf(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

}  // namespace

TEST_CASE("latent-site conditional matches dense Gaussian conditioning") {
  for (std::size_t n : {3, 4, 6}) {
    const TimeSeries d = instance(n);
    const OUState s = state_for(d);
    MixtureConfig cfg;
    auto latent = OutlierLatentState::initial(n, cfg);
    latent.z[1] = 1;
    latent.alpha[1] = 30.0;
    const Eigen::MatrixXd k = ou_cov(d, s.sigma2, s.tau);
    for (std::size_t i = 0; i < n; ++i) {
      CAPTURE(n);
      CAPTURE(i);
      // Joint of (Y_1..Y_n, y_i).
      Eigen::MatrixXd cov(n + 1, n + 1);
      cov.topLeftCorner(n, n) = k;
      cov.block(0, n, n, 1) = k.col(Eigen::Index(i));
      cov.block(n, 0, 1, n) = k.row(Eigen::Index(i));
      cov(n, n) = k(i, i) + latent.inflation(i) * d.V[i];
      const Eigen::VectorXd mean = Eigen::VectorXd::Constant(n + 1, s.mu);
      std::vector<int> obs;
      Eigen::VectorXd vals(n);
      int j = 0;
      for (std::size_t m = 0; m < n; ++m) {
        if (m == i) continue;
        obs.push_back(int(m));
        vals(j++) = s.Y[m];
      }
      obs.push_back(int(n));
      vals(j) = d.y[i];
      const auto c = condition_gaussian(mean, cov, {int(i)}, obs, vals);
      const auto p = latent_site_conditional(i, s, d, latent);
      CHECK(rel_err(p.mean, c.mean(0)) < 1e-8);
      CHECK(rel_err(p.variance, c.cov(0, 0)) < 1e-8);
    }
  }
}

TEST_CASE("mu conditional matches generalized least squares on the dense covariance") {
  for (std::size_t n : {3, 4, 6}) {
    const TimeSeries d = instance(n);
    const OUState s = state_for(d);
    const Eigen::MatrixXd k = ou_cov(d, s.sigma2, s.tau);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(k);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(Eigen::Index(n));
    const Eigen::VectorXd kinv1 = ldlt.solve(ones);
    const double precision = ones.dot(kinv1);
    const auto p = mu_conditional(s, d);
    CHECK(rel_err(p.mean, kinv1.dot(as_vec(s.Y)) / precision) < 1e-8);
    CHECK(rel_err(p.variance, 1.0 / precision) < 1e-8);
  }
}

TEST_CASE("sigma^2 conditional matches the dense likelihood times its prior") {
  for (std::size_t n : {3, 4, 6}) {
    const TimeSeries d = instance(n);
    const OUState s = state_for(d);
    const OUPrior prior;
    const auto ig = sigma2_conditional(s, d, prior);
    auto oracle = [&](double s2) {
      return log_mvn(as_vec(s.Y), Eigen::VectorXd::Constant(Eigen::Index(n), s.mu), ou_cov(d, s2, s.tau)) +
             ig_logpdf(s2, prior.sigma2_shape, prior.sigma2_scale);
    };
    const double ref = 4e-4;
    for (double s2 : {1e-4, 3e-4, 2e-3}) {
      CHECK(rel_err(ig_logpdf(s2, ig.shape, ig.scale) - ig_logpdf(ref, ig.shape, ig.scale), oracle(s2) - oracle(ref)) < 1e-8);
    }
  }
}

TEST_CASE("tau log conditional matches the dense likelihood times its prior") {
  for (std::size_t n : {3, 4, 6}) {
    const TimeSeries d = instance(n);
    const OUState s = state_for(d);
    const OUPrior prior;
    auto oracle = [&](double tau) {
      return log_mvn(as_vec(s.Y), Eigen::VectorXd::Constant(Eigen::Index(n), s.mu), ou_cov(d, s.sigma2, tau)) +
             ig_logpdf(tau, prior.tau_shape, prior.tau_scale);
    };
    for (double tau : {5.0, 60.0, 300.0, 2000.0}) {
      CHECK(rel_err(tau_log_conditional(tau, s, d, prior) - tau_log_conditional(90.0, s, d, prior), oracle(tau) - oracle(90.0)) < 1e-8);
    }
    CHECK(tau_log_conditional(-1.0, s, d, prior) == -INFINITY);
  }
}

TEST_CASE("tau Metropolis-Hastings targets its conditional") {
  const TimeSeries d = instance(6);
  OUState s = state_for(d);
  const OUPrior prior;
  double num = 0.0, den = 0.0;
  for (double lt = -6.0; lt < 14.0; lt += 1e-4) {
    const double w = std::exp(tau_log_conditional(std::exp(lt), s, d, prior) - tau_log_conditional(90.0, s, d, prior) + lt);
    num += lt * w;
    den += w;
  }
  RngStream rng(3, 1);
  double sum = 0.0;
  const int iters = 400000;
  for (int i = 0; i < iters; ++i) {
    s.tau = update_tau_mh(s, d, prior, 1.5, rng).value;
    sum += std::log(s.tau);
  }
  CHECK(sum / iters == doctest::Approx(num / den).epsilon(0.03));
}

TEST_CASE("repeated times share one latent value") {
  TimeSeries d;
  d.t = {0.0, 5.0, 5.0, 9.0};
  d.y = {1.0, 1.2, 0.8, 1.1};
  d.V = {0.01, 0.01, 0.04, 0.01};
  CHECK_NOTHROW(d.validate());
  OUState s = OUState::initial(d);
  MixtureConfig cfg;
  const auto latent = OutlierLatentState::initial(4, cfg);
  RngStream rng(4, 1);
  for (int k = 0; k < 10; ++k) {
    update_latent_curve(s, d, latent, rng);
    CHECK(s.Y[1] == s.Y[2]);
  }
  CHECK(std::isfinite(mu_conditional(s, d).mean));
  CHECK(sigma2_conditional(s, d, OUPrior{}).shape == doctest::Approx(1.0 + 1.5));
}

TEST_CASE("transition and stationary laws") {
  const auto st = ou_stationary_params(17.0, 4e-4, 200.0);
  CHECK(st.variance == doctest::Approx(0.04));
  const auto tr = ou_transition_params(17.5, 100.0, 17.0, 4e-4, 200.0);
  CHECK(tr.mean == doctest::Approx(17.0 + std::exp(-0.5) * 0.5));
  CHECK(tr.variance == doctest::Approx(0.04 * (1.0 - std::exp(-1.0))));
  CHECK_THROWS_AS(ou_transition_params(0.0, 0.0, 0.0, 1.0, 1.0), InvalidParameter);
}

TEST_CASE("simulated curves: stationary variance and lag autocorrelation") {
  std::vector<double> t(2000);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 10.0 * double(i);
  const std::vector<double> V(t.size(), 1e-12);
  RngStream rng(5, 1);
  const double mu = 17.667, sigma2 = 0.018 * 0.018, tau = 284.066;
  double var = 0.0, lag = 0.0;
  std::size_t count = 0, pairs = 0;
  for (int rep = 0; rep < 400; ++rep) {
    const auto sim = ou_simulate(t, mu, sigma2, tau, V, ErrorKind::Gaussian, rng);
    for (std::size_t i = 0; i < t.size(); ++i) {
      var += (sim.Y[i] - mu) * (sim.Y[i] - mu);
      ++count;
      if (i > 0) {
        lag += (sim.Y[i] - mu) * (sim.Y[i - 1] - mu);
        ++pairs;
      }
    }
  }
  const double s = 0.5 * tau * sigma2;
  CHECK(var / double(count) == doctest::Approx(s).epsilon(0.05));
  CHECK(std::abs((lag / double(pairs)) / (var / double(count)) - std::exp(-10.0 / tau)) < 0.02);
}

TEST_CASE("macho-like simulation copies the outliers and keeps the best candidate") {
  TimeSeries templ = instance(6);
  templ.y[2] = 30.0;
  RngStream rng(6, 1);
  const std::vector<std::size_t> idx{2};
  const auto one = simulate_macho_like(templ, {17.6, 4e-4, 200.0}, idx, 1, rng);
  const auto many = simulate_macho_like(templ, {17.6, 4e-4, 200.0}, idx, 500, rng);
  CHECK(one.series.y[2] == 30.0);
  CHECK(many.series.y[2] == 30.0);
  CHECK(many.score <= one.score + 1e-12);
  CHECK(many.score == doctest::Approx(weighted_abs_difference(templ.y, many.series.y, templ.V)));
  CHECK_THROWS_AS(simulate_macho_like(templ, {17.6, 4e-4, 200.0}, std::vector<std::size_t>{6}, 1, rng),
                  InvalidParameter);
}
