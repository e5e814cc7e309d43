#include "rmix/engine.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <thread>

#include "rmix/error.hpp"

namespace rmix {

AdaptiveScale adapt_scale(AdaptiveScale scale, bool accepted, std::size_t iteration) {
  if (!scale.adapting) return scale;
  const double gain = std::pow(static_cast<double>(iteration < 1 ? 1 : iteration), -0.6);
  scale.current *= std::exp(gain * ((accepted ? 1.0 : 0.0) - scale.target));
  return scale;
}

std::string model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Toy:
      return "toy";
    case ModelKind::Hier:
      return "hier";
    case ModelKind::OU:
      return "ou";
  }
  return "?";
}

ModelKind parse_model(const std::string& name) {
  if (name == "toy") return ModelKind::Toy;
  if (name == "hier") return ModelKind::Hier;
  if (name == "ou") return ModelKind::OU;
  throw InvalidParameter("unknown model '" + name + "' (expected toy, hier or ou)");
}

ModelKind model_kind(const ModelData& data) {
  return static_cast<ModelKind>(data.index());
}

void ChainConfig::validate() const {
  if (n_iter == 0) throw InvalidParameter("n_iter must be positive");
  if (burn_in >= n_iter) throw InvalidParameter("burn_in must be smaller than n_iter");
  if (thin < 1) throw InvalidParameter("thin must be at least 1");
  if (n_chains < 1) throw InvalidParameter("n_chains must be at least 1");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) {
    throw InvalidParameter("target acceptance must lie in (0, 1)");
  }
  if (!(A_proposal_sd > 0.0 && tau_proposal_sd > 0.0 && nu_proposal_sd > 0.0)) {
    throw InvalidParameter("proposal scales must be positive");
  }
  mixture.validate();
  hier_prior.validate();
  ou_prior.validate();
}

std::size_t ChainConfig::kept_samples() const { return (n_iter - burn_in) / thin; }

MixtureConfig resolve_mixture(const ModelData& data, MixtureConfig config) {
  if (const auto* toy = std::get_if<ToyData>(&data)) {
    if (config.variant == ErrorVariant::GaussianMixture) {
      throw InvalidParameter("the toy model supports gaussian, t and nt only");
    }
    config.fixed_nu = toy->nu;
    if (config.samples_indicators()) config.fixed_theta = toy->theta;
    return config;
  }
  if (config.variant != ErrorVariant::GaussianMixture || config.fixed_alpha) return config;
  if (const auto* hier = std::get_if<HierData>(&data)) {
    config.fixed_alpha = gaussian_mixture_mle(*hier).alpha;
  } else {
    config.fixed_alpha = 100.0;
  }
  return config;
}

const std::vector<double>& ChainOutput::column(const std::string& name) const {
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j] == name) return columns[j];
  }
  throw InvalidParameter("chain has no column '" + name + "'");
}

bool ChainOutput::has_column(const std::string& name) const {
  for (const auto& n : names) {
    if (n == name) return true;
  }
  return false;
}

namespace {

// Model-specific halves of the extended Gibbs loop. Each exposes:
//   names()       monitored scalar names
//   step()        conditionals of the original sampler with V_i -> alpha_i^{z_i} V_i
//   residuals()   y_i minus the current mean of datum i
//   monitored()   current values of the monitored scalars
//   latent()      the latent vector summarized by running mean

class ToyChain {
 public:
  ToyChain(const ToyData& data, const ChainConfig&) : data_(data) {
    data_.validate();
    mu_ = gaussian_posterior(data_).mean;
    resid_.resize(data_.size());
    var_.assign(data_.size(), data_.sigma * data_.sigma);
  }
  static std::vector<std::string> names() { return {"mu"}; }
  std::span<const double> variances() const { return var_; }
  void step(const OutlierLatentState& latent, RngStream& rng, std::size_t) {
    double precision = 0.0;
    double weighted = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i) {
      const double v = latent.inflation(i) * var_[i];
      precision += 1.0 / v;
      weighted += data_.y[i] / v;
    }
    mu_ = sample_normal(weighted / precision, 1.0 / precision, rng);
  }
  std::span<const double> residuals() {
    for (std::size_t i = 0; i < data_.size(); ++i) resid_[i] = data_.y[i] - mu_;
    return resid_;
  }
  void monitored(std::vector<double>& out) const { out.push_back(mu_); }
  std::span<const double> latent() const { return {&mu_, 1}; }
  void finish(ChainOutput&) const {}
  void freeze() {}

 private:
  ToyData data_;
  double mu_ = 0.0;
  std::vector<double> resid_;
  std::vector<double> var_;
};

class HierChain {
 public:
  HierChain(const HierData& data, const ChainConfig& config)
      : data_(data), prior_(config.hier_prior), state_(HierState::initial(data)) {
    scale_.current = config.A_proposal_sd;
    scale_.target = config.target_acceptance;
    scale_.adapting = config.burn_in > 0;
    resid_.resize(data_.size());
  }
  static std::vector<std::string> names() { return {"beta", "log_A"}; }
  std::span<const double> variances() const { return data_.V; }
  void step(const OutlierLatentState& latent, RngStream& rng, std::size_t iteration) {
    update_random_effects(state_, data_, latent, rng);
    state_.beta = update_beta(state_, prior_, rng);
    const MhResult r = update_A_mh(state_, prior_, scale_.current, rng);
    state_.A = r.value;
    if (scale_.adapting) {
      scale_ = adapt_scale(scale_, r.accepted, iteration);
    } else {
      scale_.record(r.accepted);
    }
  }
  std::span<const double> residuals() {
    for (std::size_t i = 0; i < data_.size(); ++i) resid_[i] = data_.y[i] - state_.mu[i];
    return resid_;
  }
  void monitored(std::vector<double>& out) const {
    out.push_back(state_.beta);
    out.push_back(std::log(state_.A));
  }
  std::span<const double> latent() const { return state_.mu; }
  void freeze() { scale_.adapting = false; }
  void finish(ChainOutput& out) const {
    out.acceptance["A"] = scale_.acceptance_rate();
    out.proposal_scale["A"] = scale_.current;
  }

 private:
  HierData data_;
  HierPrior prior_;
  HierState state_;
  AdaptiveScale scale_;
  std::vector<double> resid_;
};

class OUChain {
 public:
  OUChain(const TimeSeries& data, const ChainConfig& config)
      : data_(data), prior_(config.ou_prior), state_(OUState::initial(data)) {
    scale_.current = config.tau_proposal_sd;
    scale_.target = config.target_acceptance;
    scale_.adapting = config.burn_in > 0;
    resid_.resize(data_.size());
  }
  static std::vector<std::string> names() { return {"mu", "log_sigma", "log_tau"}; }
  std::span<const double> variances() const { return data_.V; }
  void step(const OutlierLatentState& latent, RngStream& rng, std::size_t iteration) {
    update_latent_curve(state_, data_, latent, rng);
    state_.mu = update_mu(state_, data_, prior_, rng);
    state_.sigma2 = update_sigma2(state_, data_, prior_, rng);
    const MhResult r = update_tau_mh(state_, data_, prior_, scale_.current, rng);
    state_.tau = r.value;
    if (scale_.adapting) {
      scale_ = adapt_scale(scale_, r.accepted, iteration);
    } else {
      scale_.record(r.accepted);
    }
  }
  std::span<const double> residuals() {
    for (std::size_t i = 0; i < data_.size(); ++i) resid_[i] = data_.y[i] - state_.Y[i];
    return resid_;
  }
  void monitored(std::vector<double>& out) const {
    out.push_back(state_.mu);
    out.push_back(0.5 * std::log(state_.sigma2));
    out.push_back(std::log(state_.tau));
  }
  std::span<const double> latent() const { return state_.Y; }
  void freeze() { scale_.adapting = false; }
  void finish(ChainOutput& out) const {
    out.acceptance["tau"] = scale_.acceptance_rate();
    out.proposal_scale["tau"] = scale_.current;
  }

 private:
  TimeSeries data_;
  OUPrior prior_;
  OUState state_;
  AdaptiveScale scale_;
  std::vector<double> resid_;
};

template <class Chain, class Data>
ChainOutput run_model_chain(const Data& data, const ChainConfig& config, ModelKind kind,
                            std::uint64_t stream_id) {
  const auto start = std::chrono::steady_clock::now();
  RngStream model_rng(config.seed, stream_id, 0);
  RngStream latent_rng(config.seed, stream_id, 1);

  Chain chain(data, config);
  const MixtureConfig& mix = config.mixture;
  const std::size_t n = chain.variances().size();
  OutlierLatentState latent = OutlierLatentState::initial(n, mix);
  AdaptiveScale nu_scale;
  nu_scale.current = config.nu_proposal_sd;
  nu_scale.target = config.target_acceptance;
  nu_scale.adapting = config.burn_in > 0;

  ChainOutput out;
  out.model = kind;
  out.variant = mix.variant;
  out.stream_id = stream_id;
  out.fixed_alpha = mix.fixed_alpha;
  out.names = Chain::names();
  if (mix.samples_theta()) out.names.push_back("theta");
  if (mix.samples_nu()) out.names.push_back("nu");
  const std::size_t kept = config.kept_samples();
  out.columns.assign(out.names.size(), {});
  for (auto& c : out.columns) c.reserve(kept);
  out.z_mean.assign(n, 0.0);
  out.latent_mean.assign(chain.latent().size(), 0.0);

  std::vector<double> scalars;
  scalars.reserve(out.names.size());
  for (std::size_t it = 1; it <= config.n_iter; ++it) {
    std::optional<bool> accepted_nu;
    try {
      chain.step(latent, model_rng, it);
      accepted_nu =
          update_outlier_state(latent, chain.residuals(), chain.variances(), mix, nu_scale.current, latent_rng);
    } catch (const InvalidParameter& e) {
      // A conditional received a non-finite or degenerate argument mid-run.
      throw ChainDiverged("chain " + std::to_string(stream_id) + ": " + e.what(), it);
    }
    if (accepted_nu) {
      if (nu_scale.adapting) {
        nu_scale = adapt_scale(nu_scale, *accepted_nu, it);
      } else {
        nu_scale.record(*accepted_nu);
      }
    }

    scalars.clear();
    chain.monitored(scalars);
    if (mix.samples_theta()) scalars.push_back(latent.theta);
    if (mix.samples_nu()) scalars.push_back(latent.nu);
    for (double v : scalars) {
      if (!std::isfinite(v)) throw ChainDiverged("non-finite parameter in chain " + std::to_string(stream_id), it);
    }

    if (it == config.burn_in) {
      chain.freeze();
      nu_scale.adapting = false;
    }
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
      for (std::size_t j = 0; j < scalars.size(); ++j) out.columns[j].push_back(scalars[j]);
      for (std::size_t i = 0; i < n; ++i) out.z_mean[i] += latent.z[i];
      const auto lv = chain.latent();
      for (std::size_t i = 0; i < lv.size(); ++i) out.latent_mean[i] += lv[i];
    }
  }
  const double denom = static_cast<double>(std::max<std::size_t>(kept, 1));
  for (auto& v : out.z_mean) v /= denom;
  for (auto& v : out.latent_mean) v /= denom;
  chain.finish(out);
  if (mix.samples_nu()) {
    out.acceptance["nu"] = nu_scale.acceptance_rate();
    out.proposal_scale["nu"] = nu_scale.current;
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace

ChainOutput run_chain(const ModelData& data, const ChainConfig& config, std::uint64_t stream_id) {
  config.validate();
  if (config.mixture.variant == ErrorVariant::GaussianMixture && !config.mixture.fixed_alpha) {
    throw InvalidParameter("nn variant needs fixed_alpha; call resolve_mixture first");
  }
  return std::visit(
      [&](const auto& d) -> ChainOutput {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, ToyData>) {
          return run_model_chain<ToyChain>(d, config, ModelKind::Toy, stream_id);
        } else if constexpr (std::is_same_v<T, HierData>) {
          return run_model_chain<HierChain>(d, config, ModelKind::Hier, stream_id);
        } else {
          return run_model_chain<OUChain>(d, config, ModelKind::OU, stream_id);
        }
      },
      data);
}

unsigned default_thread_count() {
  if (const char* env = std::getenv("RMIX_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

std::vector<ChainOutput> run_ensemble(const ModelData& data, const ChainConfig& config,
                                      unsigned threads) {
  config.validate();
  const std::size_t n = config.n_chains;
  std::vector<ChainOutput> outputs(n);
  std::vector<std::exception_ptr> errors(n);
  if (threads == 0) threads = default_thread_count();
  const auto workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        outputs[i] = run_chain(data, config, i + 1);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return outputs;
}

}  // namespace rmix
