#include "rmix/mixture.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include "rmix/error.hpp"

namespace rmix {

std::string variant_code(ErrorVariant v) {
  switch (v) {
    case ErrorVariant::Gaussian:
      return "gaussian";
    case ErrorVariant::StudentT:
      return "t";
    case ErrorVariant::GaussianMixture:
      return "nn";
    case ErrorVariant::ProposedMixture:
      return "nt";
  }
  return "?";
}

ErrorVariant parse_variant(const std::string& code) {
  if (code == "gaussian" || code == "N" || code == "n") return ErrorVariant::Gaussian;
  if (code == "t") return ErrorVariant::StudentT;
  if (code == "nn") return ErrorVariant::GaussianMixture;
  if (code == "nt") return ErrorVariant::ProposedMixture;
  throw InvalidParameter("unknown error variant '" + code + "' (expected gaussian, t, nn or nt)");
}

MixtureConfig MixtureConfig::uniform_prior(ErrorVariant v) {
  MixtureConfig c;
  c.k = 2.0;
  c.m = 0.5;
  c.variant = v;
  return c;
}

void MixtureConfig::validate() const {
  if (!(k > 0.0) || !std::isfinite(k)) throw InvalidParameter("mixture k must be positive");
  if (!(m > 0.0 && m < 1.0)) throw InvalidParameter("mixture m must lie in (0, 1)");
  if (!(nu_lo > 0.0 && nu_lo < nu_hi)) throw InvalidParameter("need 0 < nu_lo < nu_hi");
  const bool nn = variant == ErrorVariant::GaussianMixture;
  if (nn && !fixed_alpha) throw InvalidParameter("Gaussian-mixture variant needs a fixed alpha");
  if (!nn && fixed_alpha) throw InvalidParameter("fixed alpha is only valid for the nn variant");
  if (fixed_alpha && !(*fixed_alpha > 0.0)) throw InvalidParameter("fixed alpha must be positive");
  if (fixed_theta && !(*fixed_theta >= 0.0 && *fixed_theta <= 1.0)) {
    throw InvalidParameter("fixed theta must lie in [0, 1]");
  }
  if (fixed_nu && !(*fixed_nu > 0.0)) throw InvalidParameter("fixed nu must be positive");
}

bool MixtureConfig::samples_indicators() const {
  return variant == ErrorVariant::GaussianMixture || variant == ErrorVariant::ProposedMixture;
}

bool MixtureConfig::samples_theta() const { return samples_indicators() && !fixed_theta; }

bool MixtureConfig::samples_alpha() const {
  return (variant == ErrorVariant::StudentT || variant == ErrorVariant::ProposedMixture) &&
         !fixed_alpha;
}

bool MixtureConfig::samples_nu() const { return samples_alpha() && !fixed_nu; }

OutlierLatentState OutlierLatentState::initial(std::size_t n, const MixtureConfig& config) {
  OutlierLatentState s;
  s.z.assign(n, config.variant == ErrorVariant::StudentT ? 1 : 0);
  s.alpha.assign(n, config.fixed_alpha.value_or(1.0));
  s.theta = config.fixed_theta.value_or(0.01);
  s.nu = config.fixed_nu.value_or(4.0);
  return s;
}

double indicator_probability(double y_resid, double V, double alpha_i, double theta) {
  if (!(V > 0.0)) throw InvalidParameter("indicator update needs V > 0");
  if (!(alpha_i > 0.0)) throw InvalidParameter("indicator update needs alpha > 0");
  if (!(theta >= 0.0 && theta <= 1.0)) throw InvalidParameter("theta must lie in [0, 1]");
  // log of [(1 - theta) N(r; 0, V)] / [theta N(r; 0, alpha V)]
  const double q = y_resid * y_resid / V;
  const double log_odds_against = std::log1p(-theta) - std::log(theta) +
                                  0.5 * std::log(alpha_i) - 0.5 * q * (1.0 - 1.0 / alpha_i);
  return 1.0 / (1.0 + std::exp(log_odds_against));
}

std::uint8_t update_indicator(double y_resid, double V, double alpha_i, double theta,
                              RngStream& rng) {
  const double p = indicator_probability(y_resid, V, alpha_i, theta);
  return rng.uniform() < p ? 1 : 0;
}

double update_theta(std::span<const std::uint8_t> z, double k, double m, RngStream& rng) {
  const double n = static_cast<double>(z.size());
  const double ones = static_cast<double>(std::accumulate(z.begin(), z.end(), std::size_t{0}));
  return sample_beta(k * m + ones, k * (1.0 - m) + n - ones, rng);
}

double update_alpha(double y_resid, double V, std::uint8_t z_i, double nu, RngStream& rng) {
  if (!(V > 0.0)) throw InvalidParameter("alpha update needs V > 0");
  const double zi = z_i ? 1.0 : 0.0;
  return sample_inverse_gamma(0.5 * (nu + zi), 0.5 * (nu + zi * y_resid * y_resid / V), rng);
}

double nu_log_conditional(std::span<const double> alpha, double nu, double nu_lo,
                          double nu_hi) {
  if (!(nu > nu_lo && nu < nu_hi)) return -std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (double a : alpha) {
    if (!(a > 0.0)) throw InvalidParameter("alpha must be positive");
    s += std::log(a) + 1.0 / a;
  }
  const double n = static_cast<double>(alpha.size());
  const double h = 0.5 * nu;
  return n * h * std::log(h) - n * boost::math::lgamma(h) - h * s;
}

MhResult update_nu_mh(std::span<const double> alpha, double nu_current, double proposal_sd,
                      RngStream& rng, double nu_lo, double nu_hi) {
  const double log_proposal = std::log(nu_current) + proposal_sd * rng.normal();
  const double proposal = std::exp(log_proposal);
  if (!(proposal > nu_lo && proposal < nu_hi)) return {nu_current, false};
  const double log_ratio = nu_log_conditional(alpha, proposal, nu_lo, nu_hi) -
                           nu_log_conditional(alpha, nu_current, nu_lo, nu_hi) + log_proposal -
                           std::log(nu_current);
  if (std::log(rng.uniform()) < log_ratio) return {proposal, true};
  return {nu_current, false};
}

std::optional<bool> update_outlier_state(OutlierLatentState& state,
                                         std::span<const double> residuals,
                                         std::span<const double> V, const MixtureConfig& config,
                                         double nu_proposal_sd, RngStream& rng) {
  const std::size_t n = state.size();
  if (residuals.size() != n || V.size() != n) {
    throw InvalidParameter("latent state, residuals and variances differ in length");
  }
  if (config.samples_indicators()) {
    for (std::size_t i = 0; i < n; ++i) {
      state.z[i] = update_indicator(residuals[i], V[i], state.alpha[i], state.theta, rng);
    }
  }
  if (config.samples_theta()) {
    state.theta = update_theta(state.z, config.k, config.m, rng);
  }
  if (config.samples_alpha()) {
    for (std::size_t i = 0; i < n; ++i) {
      state.alpha[i] = update_alpha(residuals[i], V[i], state.z[i], state.nu, rng);
    }
  }
  if (config.samples_nu()) {
    const MhResult r =
        update_nu_mh(state.alpha, state.nu, nu_proposal_sd, rng, config.nu_lo, config.nu_hi);
    state.nu = r.value;
    return r.accepted;
  }
  return std::nullopt;
}

double huber_loss(double x, double k) {
  if (!(k > 0.0)) throw InvalidParameter("loss threshold k must be positive");
  const double ax = std::abs(x);
  return ax < k ? 0.5 * x * x : k * ax - 0.5 * k * k;
}

double mixture_loss(double x, double k, double nu) {
  if (!(k > 0.0)) throw InvalidParameter("loss threshold k must be positive");
  if (!(nu > 0.0)) throw InvalidParameter("degrees of freedom must be positive");
  if (std::abs(x) < k) return 0.5 * x * x;
  const double c = 0.5 * (nu + 1.0);
  const double g = c * std::log1p(k * k / nu) - 0.5 * k * k;
  return c * std::log1p(x * x / nu) - g;
}

}  // namespace rmix
