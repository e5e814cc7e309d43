#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rmix/adaptive_scale.hpp"
#include "rmix/dists.hpp"

namespace rmix {

/// The four measurement-error models. Codes follow the table labels: N, t, N+N, N+t.
enum class ErrorVariant { Gaussian, StudentT, GaussianMixture, ProposedMixture };

/// "gaussian", "t", "nn", "nt".
std::string variant_code(ErrorVariant v);
/// Parses a variant code; throws InvalidParameter on anything else.
ErrorVariant parse_variant(const std::string& code);

struct MixtureConfig {
  double k = 31.0;  ///< pseudo-observation count of the Beta prior on theta
  double m = 0.01;  ///< prior mean outlier proportion
  double nu_lo = 1.0;
  double nu_hi = 40.0;
  ErrorVariant variant = ErrorVariant::ProposedMixture;
  /// Required iff variant == GaussianMixture; disables alpha and nu updates.
  std::optional<double> fixed_alpha;
  /// Holds theta constant (toy model, or theta forced to 0).
  std::optional<double> fixed_theta;
  /// Holds nu constant (toy model uses nu = 4).
  std::optional<double> fixed_nu;

  /// Uniform(0, 1) prior on theta, i.e. k = 2 and m = 0.5.
  static MixtureConfig uniform_prior(ErrorVariant v);

  void validate() const;

  bool samples_indicators() const;
  bool samples_theta() const;
  bool samples_alpha() const;
  bool samples_nu() const;
};

/// Per-datum outlier indicators z and inflations alpha, plus the global theta and nu.
struct OutlierLatentState {
  std::vector<std::uint8_t> z;
  std::vector<double> alpha;
  double theta = 0.01;
  double nu = 4.0;

  /// Starting state: z = 0 (1 for StudentT), alpha = 1 (fixed_alpha for GaussianMixture),
  /// theta = 0.01 unless fixed, nu = 4 unless fixed.
  static OutlierLatentState initial(std::size_t n, const MixtureConfig& config);

  std::size_t size() const { return z.size(); }
  /// alpha_i^{z_i}: the factor that multiplies the known variance V_i.
  double inflation(std::size_t i) const { return z[i] ? alpha[i] : 1.0; }
};

/// P(z_i = 1 | rest): theta N(r; 0, alpha V) / [theta N(r; 0, alpha V) + (1 - theta) N(r; 0, V)],
/// evaluated in log space.
double indicator_probability(double y_resid, double V, double alpha_i, double theta);
std::uint8_t update_indicator(double y_resid, double V, double alpha_i, double theta,
                              RngStream& rng);

/// Beta(k m + sum z, k (1 - m) + n - sum z) draw.
double update_theta(std::span<const std::uint8_t> z, double k, double m, RngStream& rng);

/// inverse-Gamma((nu + z) / 2, (nu + z r^2 / V) / 2) draw.
double update_alpha(double y_resid, double V, std::uint8_t z_i, double nu, RngStream& rng);

/// Unnormalized log conditional of nu:
/// (n nu / 2) log(nu / 2) - n lgamma(nu / 2) - (nu / 2) sum(log alpha + 1 / alpha),
/// -inf outside (nu_lo, nu_hi).
double nu_log_conditional(std::span<const double> alpha, double nu, double nu_lo = 1.0,
                          double nu_hi = 40.0);

/// Random walk on log nu with the nu* / nu Hastings factor.
MhResult update_nu_mh(std::span<const double> alpha, double nu_current, double proposal_sd,
                      RngStream& rng, double nu_lo = 1.0, double nu_hi = 40.0);

/// One pass of the mixture updates (z, theta, alpha, nu) honouring the variant gating.
/// `residuals[i]` is y_i minus the model's current mean for datum i. Returns the
/// outcome of the nu step when one was taken.
std::optional<bool> update_outlier_state(OutlierLatentState& state,
                                         std::span<const double> residuals,
                                         std::span<const double> V, const MixtureConfig& config,
                                         double nu_proposal_sd, RngStream& rng);

double huber_loss(double x, double k);
/// x^2 / 2 inside (-k, k); (nu + 1) / 2 log(1 + x^2 / nu) - g(k) outside, with g making
/// the two branches meet at |x| = k.
double mixture_loss(double x, double k, double nu);

}  // namespace rmix
