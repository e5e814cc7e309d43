#pragma once

#include <span>
#include <vector>

#include "rmix/adaptive_scale.hpp"
#include "rmix/dists.hpp"
#include "rmix/hier_model.hpp"
#include "rmix/mixture.hpp"

namespace rmix {

/// Irregularly sampled light curve: times (days), magnitudes, measurement variances.
struct TimeSeries {
  std::vector<double> t;
  std::vector<double> y;
  std::vector<double> V;

  void validate() const;
  std::size_t size() const { return t.size(); }
};

/// Latent curve Y(t_i) and the Ornstein-Uhlenbeck parameters.
struct OUState {
  std::vector<double> Y;
  double mu = 0.0;
  double sigma2 = 1e-4;
  double tau = 200.0;

  /// Y = y, mu = mean(y), sigma = 0.01, tau = 200.
  static OUState initial(const TimeSeries& data);
};

/// mu ~ Uniform(mu_lo, mu_hi), sigma^2 ~ IG(sigma2_shape, sigma2_scale),
/// tau ~ IG(tau_shape, tau_scale).
struct OUPrior {
  double mu_lo = -30.0;
  double mu_hi = 30.0;
  double sigma2_shape = 1.0;
  double sigma2_scale = 1e-7;
  double tau_shape = 1.0;
  double tau_scale = 1.0;

  void validate() const;
};

/// Gaussian transition of the process over a gap dt:
/// mean mu + a (y_prev - mu), variance (tau sigma^2 / 2)(1 - a^2), a = exp(-dt / tau).
NormalParams ou_transition_params(double y_prev, double dt, double mu, double sigma2, double tau);
/// Stationary law N(mu, tau sigma^2 / 2), used for the first point.
NormalParams ou_stationary_params(double mu, double sigma2, double tau);

/// Two time points closer than this fraction of tau share one latent value.
inline constexpr double kDegenerateGap = 1e-12;

/// Full conditional of Y(t_i) given its neighbours, the data point and the O-U
/// parameters, with V_i replaced by alpha_i^{z_i} V_i. Assumes the gaps around i are
/// not degenerate.
NormalParams latent_site_conditional(std::size_t i, const OUState& state, const TimeSeries& data,
                                     const OutlierLatentState& latent);

/// One sequential single-site sweep i = 1..n; each draw conditions on the current
/// neighbours. Runs of degenerate gaps are updated as one block.
void update_latent_curve(OUState& state, const TimeSeries& data, const OutlierLatentState& latent,
                         RngStream& rng);

/// Untruncated Gaussian conditional of mu given the latent curve.
NormalParams mu_conditional(const OUState& state, const TimeSeries& data);
/// Conditional truncated to the prior support (mu_lo, mu_hi).
double update_mu(const OUState& state, const TimeSeries& data, const OUPrior& prior,
                 RngStream& rng);

InvGammaParams sigma2_conditional(const OUState& state, const TimeSeries& data,
                                  const OUPrior& prior);
double update_sigma2(const OUState& state, const TimeSeries& data, const OUPrior& prior,
                     RngStream& rng);

/// Unnormalized log conditional of tau given the curve, mu and sigma^2; -inf for tau <= 0.
double tau_log_conditional(double tau, const OUState& state, const TimeSeries& data,
                           const OUPrior& prior);
/// Log-normal random walk on tau with the tau* / tau Hastings factor.
MhResult update_tau_mh(const OUState& state, const TimeSeries& data, const OUPrior& prior,
                       double proposal_sd, RngStream& rng);

struct OUSimulation {
  std::vector<double> Y;
  std::vector<double> y;
};

/// Latent curve drawn sequentially from the transition law, then observations with
/// Gaussian or sqrt(V_i) t_4 errors. sigma2 = 0 gives the flat curve Y = mu.
OUSimulation ou_simulate(std::span<const double> t, double mu, double sigma2, double tau,
                         std::span<const double> V, ErrorKind kind, RngStream& rng);

struct OUParams {
  double mu;
  double sigma2;
  double tau;
};

/// sum_i |a_i - b_i| / sqrt(V_i).
double weighted_abs_difference(std::span<const double> a, std::span<const double> b,
                               std::span<const double> V);

struct MachoSimulation {
  TimeSeries series;
  std::vector<double> Y;
  double score;
};

/// Repeats ou_simulate on the template's times and variances; after each draw the
/// outlier indices (0-based) are overwritten with the template's own values. Returns the
/// candidate closest to template.y in weighted absolute difference.
MachoSimulation simulate_macho_like(const TimeSeries& templ, const OUParams& gen,
                                    std::span<const std::size_t> outlier_indices,
                                    std::size_t repeats, RngStream& rng);

}  // namespace rmix
