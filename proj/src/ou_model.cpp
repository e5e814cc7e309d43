#include "rmix/ou_model.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "rmix/error.hpp"

namespace rmix {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Shrinkage a = exp(-gap) and 1 - a^2 for a gap measured in units of tau.
struct Decay {
  double a;
  double one_minus_a2;
};

Decay decay(double gap_over_tau) {
  return {std::exp(-gap_over_tau), -std::expm1(-2.0 * gap_over_tau)};
}

// Block starts: consecutive points closer than kDegenerateGap * tau share a value.
// starts.back() == n as a sentinel.
std::vector<std::size_t> block_starts(const std::vector<double>& t, double tau) {
  std::vector<std::size_t> starts;
  starts.reserve(t.size() + 1);
  starts.push_back(0);
  for (std::size_t i = 1; i < t.size(); ++i) {
    if ((t[i] - t[i - 1]) / tau >= kDegenerateGap) starts.push_back(i);
  }
  starts.push_back(t.size());
  return starts;
}

struct Neighbour {
  bool present;
  double value;  // centred latent value
  Decay d;
};

// Conditional of one centred latent value given its observation (y_c, v) and its
// neighbours in the chain; s = tau sigma^2 / 2 is the stationary variance.
NormalParams centred_conditional(double y_c, double v, const Neighbour& prev,
                                 const Neighbour& next, double s) {
  double prior_var;
  double prior_mean;
  if (!prev.present && !next.present) {
    prior_var = s;
    prior_mean = 0.0;
  } else if (!prev.present) {
    prior_var = s * next.d.one_minus_a2;
    prior_mean = next.d.a * next.value;
  } else if (!next.present) {
    prior_var = s * prev.d.one_minus_a2;
    prior_mean = prev.d.a * prev.value;
  } else {
    // 1 - a_i^2 a_{i+1}^2 for the combined gap.
    const double joint = 1.0 - (1.0 - prev.d.one_minus_a2) * (1.0 - next.d.one_minus_a2);
    prior_var = s * prev.d.one_minus_a2 * next.d.one_minus_a2 / joint;
    const double b_star = next.d.one_minus_a2 / joint;
    // (1 - B*) / a_{i+1} simplified so that a_{i+1} -> 0 stays finite.
    const double next_coef = next.d.a * prev.d.one_minus_a2 / joint;
    prior_mean = next_coef * next.value + b_star * prev.d.a * prev.value;
  }
  const double B = v / (v + prior_var);
  return {(1.0 - B) * y_c + B * prior_mean, v * prior_var / (v + prior_var)};
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void check_state(const OUState& state) {
  if (!(state.sigma2 > 0.0) || !(state.tau > 0.0) || !std::isfinite(state.mu)) {
    throw InvalidParameter("O-U state needs finite mu and positive sigma^2, tau");
  }
}

}  // namespace

void TimeSeries::validate() const {
  if (t.size() != y.size() || t.size() != V.size()) {
    throw InvalidParameter("time series columns differ in length");
  }
  if (t.size() < 2) throw InvalidParameter("time series needs at least two points");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i]) || !std::isfinite(y[i])) throw InvalidParameter("t and y must be finite");
    if (!(V[i] > 0.0) || !std::isfinite(V[i])) throw InvalidParameter("V must be positive");
    if (i > 0 && !(t[i] >= t[i - 1])) throw InvalidParameter("times must be non-decreasing");
  }
}

OUState OUState::initial(const TimeSeries& data) {
  data.validate();
  OUState s;
  s.Y = data.y;
  s.mu = mean_of(data.y);
  s.sigma2 = 0.01 * 0.01;
  s.tau = 200.0;
  return s;
}

void OUPrior::validate() const {
  if (!(mu_lo < mu_hi)) throw InvalidParameter("O-U prior needs mu_lo < mu_hi");
  if (!(sigma2_shape > 0.0 && sigma2_scale > 0.0 && tau_shape > 0.0 && tau_scale > 0.0)) {
    throw InvalidParameter("O-U inverse-gamma prior constants must be positive");
  }
}

NormalParams ou_transition_params(double y_prev, double dt, double mu, double sigma2, double tau) {
  if (!(dt > 0.0) || !(tau > 0.0) || !(sigma2 >= 0.0)) {
    throw InvalidParameter("transition needs dt > 0, tau > 0, sigma^2 >= 0");
  }
  const Decay d = decay(dt / tau);
  return {mu + d.a * (y_prev - mu), 0.5 * tau * sigma2 * d.one_minus_a2};
}

NormalParams ou_stationary_params(double mu, double sigma2, double tau) {
  return {mu, 0.5 * tau * sigma2};
}

NormalParams latent_site_conditional(std::size_t i, const OUState& state, const TimeSeries& data,
                                     const OutlierLatentState& latent) {
  check_state(state);
  const std::size_t n = data.size();
  if (i >= n) throw InvalidParameter("site index out of range");
  const double s = 0.5 * state.tau * state.sigma2;
  Neighbour prev{false, 0.0, {}};
  Neighbour next{false, 0.0, {}};
  if (i > 0) prev = {true, state.Y[i - 1] - state.mu, decay((data.t[i] - data.t[i - 1]) / state.tau)};
  if (i + 1 < n) next = {true, state.Y[i + 1] - state.mu, decay((data.t[i + 1] - data.t[i]) / state.tau)};
  const double v = latent.inflation(i) * data.V[i];
  NormalParams c = centred_conditional(data.y[i] - state.mu, v, prev, next, s);
  c.mean += state.mu;
  return c;
}

void update_latent_curve(OUState& state, const TimeSeries& data, const OutlierLatentState& latent,
                         RngStream& rng) {
  check_state(state);
  const double s = 0.5 * state.tau * state.sigma2;
  const auto starts = block_starts(data.t, state.tau);
  const std::size_t blocks = starts.size() - 1;
  state.Y.resize(data.size());
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t first = starts[b];
    const std::size_t end = starts[b + 1];
    // Members of a block act as one pseudo-observation with pooled precision.
    double precision = 0.0;
    double weighted = 0.0;
    for (std::size_t i = first; i < end; ++i) {
      const double v = latent.inflation(i) * data.V[i];
      precision += 1.0 / v;
      weighted += (data.y[i] - state.mu) / v;
    }
    const double v_block = 1.0 / precision;
    Neighbour prev{false, 0.0, {}};
    Neighbour next{false, 0.0, {}};
    if (b > 0) {
      prev = {true, state.Y[starts[b - 1]] - state.mu,
              decay((data.t[first] - data.t[first - 1]) / state.tau)};
    }
    if (b + 1 < blocks) {
      next = {true, state.Y[end] - state.mu, decay((data.t[end] - data.t[end - 1]) / state.tau)};
    }
    const NormalParams c = centred_conditional(weighted * v_block, v_block, prev, next, s);
    const double value = state.mu + sample_normal(c, rng);
    for (std::size_t i = first; i < end; ++i) state.Y[i] = value;
  }
}

NormalParams mu_conditional(const OUState& state, const TimeSeries& data) {
  check_state(state);
  const auto starts = block_starts(data.t, state.tau);
  double numerator = state.Y[0];
  double denominator = 1.0;
  for (std::size_t b = 1; b + 1 < starts.size(); ++b) {
    const std::size_t i = starts[b];
    const double a = std::exp(-(data.t[i] - data.t[i - 1]) / state.tau);
    numerator += (state.Y[i] - a * state.Y[starts[b - 1]]) / (1.0 + a);
    denominator += (1.0 - a) / (1.0 + a);
  }
  return {numerator / denominator, 0.5 * state.tau * state.sigma2 / denominator};
}

double update_mu(const OUState& state, const TimeSeries& data, const OUPrior& prior,
                 RngStream& rng) {
  const NormalParams c = mu_conditional(state, data);
  return sample_truncated_normal(c.mean, c.variance, prior.mu_lo, prior.mu_hi, rng);
}

InvGammaParams sigma2_conditional(const OUState& state, const TimeSeries& data,
                                  const OUPrior& prior) {
  check_state(state);
  const auto starts = block_starts(data.t, state.tau);
  const std::size_t blocks = starts.size() - 1;
  const double first = state.Y[0] - state.mu;
  double scale = prior.sigma2_scale + first * first / state.tau;
  for (std::size_t b = 1; b < blocks; ++b) {
    const std::size_t i = starts[b];
    const Decay d = decay((data.t[i] - data.t[i - 1]) / state.tau);
    const double innovation = (state.Y[i] - state.mu) - d.a * (state.Y[starts[b - 1]] - state.mu);
    scale += innovation * innovation / (state.tau * d.one_minus_a2);
  }
  return {prior.sigma2_shape + 0.5 * static_cast<double>(blocks), scale};
}

double update_sigma2(const OUState& state, const TimeSeries& data, const OUPrior& prior,
                     RngStream& rng) {
  return sample_inverse_gamma(sigma2_conditional(state, data, prior), rng);
}

double tau_log_conditional(double tau, const OUState& state, const TimeSeries& data,
                           const OUPrior& prior) {
  if (!(tau > 0.0) || !std::isfinite(tau)) return kNegInf;
  const auto starts = block_starts(data.t, tau);
  const std::size_t blocks = starts.size() - 1;
  const double ts2 = tau * state.sigma2;
  const double first = state.Y[0] - state.mu;
  double value = -(prior.tau_shape + 1.0) * std::log(tau) - prior.tau_scale / tau -
                 0.5 * std::log(tau) - first * first / ts2;
  for (std::size_t b = 1; b < blocks; ++b) {
    const std::size_t i = starts[b];
    const Decay d = decay((data.t[i] - data.t[i - 1]) / tau);
    const double innovation = (state.Y[i] - state.mu) - d.a * (state.Y[starts[b - 1]] - state.mu);
    value -= 0.5 * std::log(tau * d.one_minus_a2) + innovation * innovation / (ts2 * d.one_minus_a2);
  }
  return value;
}

MhResult update_tau_mh(const OUState& state, const TimeSeries& data, const OUPrior& prior,
                       double proposal_sd, RngStream& rng) {
  const double log_current = std::log(state.tau);
  const double log_proposal = log_current + proposal_sd * rng.normal();
  const double proposal = std::exp(log_proposal);
  const double log_ratio = tau_log_conditional(proposal, state, data, prior) -
                           tau_log_conditional(state.tau, state, data, prior) + log_proposal -
                           log_current;
  if (std::log(rng.uniform()) < log_ratio) return {proposal, true};
  return {state.tau, false};
}

OUSimulation ou_simulate(std::span<const double> t, double mu, double sigma2, double tau,
                         std::span<const double> V, ErrorKind kind, RngStream& rng) {
  if (t.size() != V.size()) throw InvalidParameter("t and V differ in length");
  if (!(sigma2 >= 0.0) || !(tau > 0.0)) throw InvalidParameter("need sigma^2 >= 0 and tau > 0");
  OUSimulation sim;
  sim.Y.resize(t.size());
  sim.y.resize(t.size());
  const double s = 0.5 * tau * sigma2;
  for (std::size_t i = 0; i < t.size(); ++i) {
    double mean = mu;
    double var = s;
    if (i > 0) {
      if (!(t[i] >= t[i - 1])) throw InvalidParameter("times must be non-decreasing");
      const Decay d = decay((t[i] - t[i - 1]) / tau);
      mean = mu + d.a * (sim.Y[i - 1] - mu);
      var = s * d.one_minus_a2;
    }
    sim.Y[i] = var > 0.0 ? sample_normal(mean, var, rng) : mean;
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(V[i] > 0.0)) throw InvalidParameter("V must be positive");
    const double noise = kind == ErrorKind::Gaussian ? rng.normal() : sample_student_t(4.0, rng);
    sim.y[i] = sim.Y[i] + std::sqrt(V[i]) * noise;
  }
  return sim;
}

double weighted_abs_difference(std::span<const double> a, std::span<const double> b,
                               std::span<const double> V) {
  if (a.size() != b.size() || a.size() != V.size()) throw InvalidParameter("length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]) / std::sqrt(V[i]);
  return s;
}

MachoSimulation simulate_macho_like(const TimeSeries& templ, const OUParams& gen,
                                    std::span<const std::size_t> outlier_indices,
                                    std::size_t repeats, RngStream& rng) {
  templ.validate();
  if (repeats < 1) throw InvalidParameter("repeats must be at least 1");
  for (std::size_t idx : outlier_indices) {
    if (idx >= templ.size()) throw InvalidParameter("outlier index out of range");
  }
  MachoSimulation best{{templ.t, {}, templ.V}, {}, std::numeric_limits<double>::infinity()};
  for (std::size_t r = 0; r < repeats; ++r) {
    OUSimulation sim = ou_simulate(templ.t, gen.mu, gen.sigma2, gen.tau, templ.V, ErrorKind::Gaussian, rng);
    for (std::size_t idx : outlier_indices) sim.y[idx] = templ.y[idx];
    const double score = weighted_abs_difference(templ.y, sim.y, templ.V);
    if (score < best.score) {
      best.series.y = std::move(sim.y);
      best.Y = std::move(sim.Y);
      best.score = score;
    }
  }
  return best;
}

}  // namespace rmix
