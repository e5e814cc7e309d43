#pragma once

#include <span>
#include <vector>

#include "rmix/adaptive_scale.hpp"
#include "rmix/dists.hpp"
#include "rmix/mixture.hpp"

namespace rmix {

/// Observed estimates y_i with known measurement variances V_i.
struct HierData {
  std::vector<double> y;
  std::vector<double> V;

  void validate() const;
  std::size_t size() const { return y.size(); }
};

/// Random effects mu_i ~ N(beta, A).
struct HierState {
  std::vector<double> mu;
  double beta = 0.0;
  double A = 1.0;

  /// mu = y, beta = mean(y), A = mean(V).
  static HierState initial(const HierData& data);
};

/// beta ~ N(0, beta_variance); shrink_scale / (shrink_scale + A) ~ Uniform(0, 1).
struct HierPrior {
  double beta_variance = 1e5;
  double shrink_scale = 1e5;

  void validate() const;
};

/// B = V / (V + A).
double shrinkage_factor(double V, double A);

/// N((1 - B) y + B beta, (1 - B) V) with B = V / (V + A).
NormalParams random_effect_conditional(double y, double V, double beta, double A);

/// Draws every mu_i from its conditional with V_i replaced by alpha_i^{z_i} V_i.
void update_random_effects(HierState& state, const HierData& data,
                           const OutlierLatentState& latent, RngStream& rng);

NormalParams beta_conditional(const HierState& state, const HierPrior& prior);
double update_beta(const HierState& state, const HierPrior& prior, RngStream& rng);

/// -2 log(c + A) - (n / 2) log(2 pi A) - sum (mu_i - beta)^2 / (2 A); -inf for A <= 0.
double A_log_conditional(double A, const HierState& state, const HierPrior& prior);

/// Log-normal random walk on A with the A* / A Hastings factor.
MhResult update_A_mh(const HierState& state, const HierPrior& prior, double proposal_sd,
                     RngStream& rng);

/// log of prod_i [theta N(y_i | beta, A + alpha V_i) + (1 - theta) N(y_i | beta, A + V_i)].
double gaussian_mixture_loglik(double beta, double theta, double A, double alpha,
                               const HierData& data);

struct GaussianMixtureMle {
  double beta;
  double theta;
  double A;
  double alpha;
  double loglik;
  std::size_t converged_starts;
};

/// Joint maximizer of gaussian_mixture_loglik over beta, theta in (0, 1), A >= 0 and
/// alpha > 1. Nelder-Mead on (beta, logit theta, sqrt A, log(alpha - 1)) from eight
/// starting points. Throws OptimizationFailure if none converges.
GaussianMixtureMle gaussian_mixture_mle(const HierData& data);

enum class ErrorKind { Gaussian, T4 };

struct HierSimulation {
  std::vector<double> mu;
  std::vector<double> y;
};

/// mu_i ~ N(beta_gen, A_gen), then y_i ~ N(mu_i, V_i) or mu_i + sqrt(V_i) t_4.
HierSimulation simulate_hier(double beta_gen, double A_gen, std::span<const double> V,
                             ErrorKind kind, RngStream& rng);

/// Shift of observation `index` (0-based) by `multiplier` measurement SDs.
struct OutlierShift {
  std::size_t index;
  double multiplier;
};

/// y_i + multiplier_i sqrt(V_i) at the listed indices; V is never modified.
std::vector<double> inject_outliers(std::span<const double> y, std::span<const double> V,
                                    std::span<const OutlierShift> shifts);

/// Replaces the first ceil(proportion * n) values with N(0, outlier_sd^2) draws.
std::vector<double> replace_with_outliers(std::span<const double> y, double proportion,
                                          double outlier_sd, RngStream& rng);

}  // namespace rmix
