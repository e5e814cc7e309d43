#include "rmix/hier_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "rmix/error.hpp"

namespace rmix {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Box on the transformed scale; outside it the objective is evaluated at the nearest
// box point plus a quadratic pull-back. A enters as a^2: the maximum often sits at
// A = 0, which is then an interior point where the objective is smooth.
constexpr std::array<double, 4> kLower{-std::numeric_limits<double>::max(), -30.0, -3000.0, -20.0};
constexpr std::array<double, 4> kUpper{std::numeric_limits<double>::max(), 30.0, 3000.0, 15.0};

struct MleProblem {
  const HierData* data;
};

std::array<double, 4> clamp_box(const gsl_vector* x, double* excess) {
  std::array<double, 4> p{};
  *excess = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    const double v = gsl_vector_get(x, j);
    p[j] = std::clamp(v, kLower[j], kUpper[j]);
    *excess += (v - p[j]) * (v - p[j]);
  }
  return p;
}

struct Natural {
  double beta, theta, A, alpha;
};

Natural from_transformed(const std::array<double, 4>& p) {
  return {p[0], 1.0 / (1.0 + std::exp(-p[1])), p[2] * p[2], 1.0 + std::exp(p[3])};
}

double negative_loglik(const gsl_vector* x, void* params) {
  const auto* problem = static_cast<const MleProblem*>(params);
  double excess = 0.0;
  const Natural q = from_transformed(clamp_box(x, &excess));
  const double ll = gaussian_mixture_loglik(q.beta, q.theta, q.A, q.alpha, *problem->data);
  if (!std::isfinite(ll)) return std::numeric_limits<double>::max();
  return -ll + 1e-3 * excess;
}

struct NelderMeadResult {
  std::array<double, 4> point;
  double value;
  bool converged;
};

NelderMeadResult nelder_mead(MleProblem& problem, const std::array<double, 4>& start,
                             const std::array<double, 4>& step) {
  gsl_multimin_function fn{&negative_loglik, 4, &problem};
  gsl_vector* x = gsl_vector_alloc(4);
  gsl_vector* ss = gsl_vector_alloc(4);
  for (std::size_t j = 0; j < 4; ++j) {
    gsl_vector_set(x, j, start[j]);
    gsl_vector_set(ss, j, step[j]);
  }
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 4);
  gsl_multimin_fminimizer_set(s, &fn, x, ss);
  bool converged = false;
  for (int iter = 0; iter < 20000; ++iter) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-6) == GSL_SUCCESS) {
      converged = true;
      break;
    }
  }
  NelderMeadResult r{};
  double excess = 0.0;
  r.point = clamp_box(gsl_multimin_fminimizer_x(s), &excess);
  r.value = gsl_multimin_fminimizer_minimum(s);
  r.converged = converged;
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(ss);
  gsl_vector_free(x);
  return r;
}

}  // namespace

void HierData::validate() const {
  if (y.size() != V.size()) throw InvalidParameter("y and V differ in length");
  if (y.empty()) throw InvalidParameter("hierarchical data is empty");
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) throw InvalidParameter("y must be finite");
    if (!(V[i] > 0.0) || !std::isfinite(V[i])) throw InvalidParameter("V must be positive");
  }
}

HierState HierState::initial(const HierData& data) {
  data.validate();
  HierState s;
  s.mu = data.y;
  s.beta = mean_of(data.y);
  s.A = mean_of(data.V);
  return s;
}

void HierPrior::validate() const {
  if (!(beta_variance > 0.0) || !(shrink_scale > 0.0)) {
    throw InvalidParameter("hierarchical prior constants must be positive");
  }
}

double shrinkage_factor(double V, double A) {
  if (!(V > 0.0) || !(A > 0.0)) throw InvalidParameter("shrinkage needs V > 0 and A > 0");
  return V / (V + A);
}

NormalParams random_effect_conditional(double y, double V, double beta, double A) {
  const double B = shrinkage_factor(V, A);
  // (1 - B) V == V A / (V + A), written without the cancellation.
  return {(1.0 - B) * y + B * beta, V * A / (V + A)};
}

void update_random_effects(HierState& state, const HierData& data,
                           const OutlierLatentState& latent, RngStream& rng) {
  if (!(state.A > 0.0)) throw InvalidParameter("A must be positive");
  const std::size_t n = data.size();
  state.mu.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v_eff = latent.inflation(i) * data.V[i];
    state.mu[i] = sample_normal(random_effect_conditional(data.y[i], v_eff, state.beta, state.A), rng);
  }
}

NormalParams beta_conditional(const HierState& state, const HierPrior& prior) {
  const double n = static_cast<double>(state.mu.size());
  const double data_precision = n / state.A;
  const double precision = data_precision + 1.0 / prior.beta_variance;
  return {data_precision * mean_of(state.mu) / precision, 1.0 / precision};
}

double update_beta(const HierState& state, const HierPrior& prior, RngStream& rng) {
  return sample_normal(beta_conditional(state, prior), rng);
}

double A_log_conditional(double A, const HierState& state, const HierPrior& prior) {
  if (!(A > 0.0)) return kNegInf;
  double ss = 0.0;
  for (double m : state.mu) ss += (m - state.beta) * (m - state.beta);
  const double n = static_cast<double>(state.mu.size());
  return -2.0 * std::log(prior.shrink_scale + A) - 0.5 * n * std::log(2.0 * std::numbers::pi * A) -
         ss / (2.0 * A);
}

MhResult update_A_mh(const HierState& state, const HierPrior& prior, double proposal_sd,
                     RngStream& rng) {
  const double log_current = std::log(state.A);
  const double log_proposal = log_current + proposal_sd * rng.normal();
  const double proposal = std::exp(log_proposal);
  const double log_ratio = A_log_conditional(proposal, state, prior) -
                           A_log_conditional(state.A, state, prior) + log_proposal - log_current;
  if (std::log(rng.uniform()) < log_ratio) return {proposal, true};
  return {state.A, false};
}

double gaussian_mixture_loglik(double beta, double theta, double A, double alpha,
                               const HierData& data) {
  const double lw1 = std::log(theta);
  const double lw0 = std::log1p(-theta);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double inflated = lw1 == kNegInf ? kNegInf
                                           : lw1 + logpdf_normal(data.y[i], beta, A + alpha * data.V[i]);
    const double plain = lw0 == kNegInf ? kNegInf : lw0 + logpdf_normal(data.y[i], beta, A + data.V[i]);
    total += log_sum_exp(inflated, plain);
  }
  return total;
}

GaussianMixtureMle gaussian_mixture_mle(const HierData& data) {
  data.validate();
  if (data.size() < 4) throw InvalidParameter("Gaussian-mixture MLE needs at least 4 observations");

  std::vector<double> sorted = data.y;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];
  const double ybar = mean_of(data.y);
  double var_y = 0.0;
  for (double v : data.y) var_y += (v - ybar) * (v - ybar);
  var_y /= static_cast<double>(data.size() - 1);
  const double v_bar = mean_of(data.V);

  const std::array<double, 2> A_starts{std::max(var_y - v_bar, 0.1 * v_bar), v_bar};
  const std::array<double, 2> theta_starts{0.05, 0.25};
  const std::array<double, 2> alpha_starts{5.0, 50.0};
  const std::array<double, 4> step{0.5 * std::sqrt(var_y), 1.0, 0.5 * std::sqrt(v_bar), 1.0};

  gsl_set_error_handler_off();
  MleProblem problem{&data};
  NelderMeadResult best{{}, std::numeric_limits<double>::infinity(), false};
  NelderMeadResult best_converged = best;
  std::size_t converged = 0;
  for (double a0 : A_starts) {
    for (double t0 : theta_starts) {
      for (double al0 : alpha_starts) {
        const std::array<double, 4> start{median, std::log(t0 / (1.0 - t0)), std::sqrt(a0),
                                          std::log(al0 - 1.0)};
        NelderMeadResult r = nelder_mead(problem, start, step);
        // Restarting from the reported optimum guards against simplex collapse.
        if (r.converged) r = nelder_mead(problem, r.point, step);
        if (r.value < best.value) best = r;
        if (r.converged) {
          ++converged;
          if (r.value < best_converged.value) best_converged = r;
        }
      }
    }
  }
  const Natural q = from_transformed(best.point);
  if (converged == 0) {
    throw OptimizationFailure("Gaussian-mixture MLE: no start converged",
                              {q.beta, q.theta, q.A, q.alpha}, -best.value);
  }
  const Natural c = from_transformed(best_converged.point);
  return {c.beta, c.theta, c.A, c.alpha, gaussian_mixture_loglik(c.beta, c.theta, c.A, c.alpha, data),
          converged};
}

HierSimulation simulate_hier(double beta_gen, double A_gen, std::span<const double> V,
                             ErrorKind kind, RngStream& rng) {
  if (!(A_gen >= 0.0)) throw InvalidParameter("A_gen must be non-negative");
  HierSimulation sim;
  sim.mu.resize(V.size());
  sim.y.resize(V.size());
  for (std::size_t i = 0; i < V.size(); ++i) {
    if (!(V[i] > 0.0)) throw InvalidParameter("V must be positive");
    sim.mu[i] = A_gen > 0.0 ? sample_normal(beta_gen, A_gen, rng) : beta_gen;
    const double noise = kind == ErrorKind::Gaussian ? rng.normal() : sample_student_t(4.0, rng);
    sim.y[i] = sim.mu[i] + std::sqrt(V[i]) * noise;
  }
  return sim;
}

std::vector<double> inject_outliers(std::span<const double> y, std::span<const double> V,
                                    std::span<const OutlierShift> shifts) {
  if (y.size() != V.size()) throw InvalidParameter("y and V differ in length");
  std::vector<double> out(y.begin(), y.end());
  for (const auto& s : shifts) {
    if (s.index >= out.size()) throw InvalidParameter("outlier index out of range");
    out[s.index] = y[s.index] + s.multiplier * std::sqrt(V[s.index]);
  }
  return out;
}

std::vector<double> replace_with_outliers(std::span<const double> y, double proportion,
                                          double outlier_sd, RngStream& rng) {
  if (!(proportion >= 0.0 && proportion <= 1.0)) throw InvalidParameter("proportion must lie in [0, 1]");
  std::vector<double> out(y.begin(), y.end());
  const auto count = static_cast<std::size_t>(
      std::ceil(proportion * static_cast<double>(out.size()) - 1e-9));
  for (std::size_t i = 0; i < count && i < out.size(); ++i) {
    out[i] = sample_normal(0.0, outlier_sd * outlier_sd, rng);
  }
  return out;
}

}  // namespace rmix
