#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rmix/adaptive_scale.hpp"
#include "rmix/hier_model.hpp"
#include "rmix/location_toy.hpp"
#include "rmix/mixture.hpp"
#include "rmix/ou_model.hpp"

namespace rmix {

enum class ModelKind { Toy, Hier, OU };

std::string model_name(ModelKind kind);
ModelKind parse_model(const std::string& name);

using ModelData = std::variant<ToyData, HierData, TimeSeries>;

ModelKind model_kind(const ModelData& data);

struct ChainConfig {
  std::size_t n_iter = 100000;
  std::size_t burn_in = 10000;
  std::size_t thin = 1;
  std::size_t n_chains = 4;
  std::uint64_t seed = 0;
  double target_acceptance = 0.35;
  MixtureConfig mixture;
  HierPrior hier_prior;
  OUPrior ou_prior;
  /// Initial random-walk standard deviations on the log scale.
  double A_proposal_sd = 1.0;
  double tau_proposal_sd = 0.5;
  double nu_proposal_sd = 0.5;

  void validate() const;
  /// floor((n_iter - burn_in) / thin)
  std::size_t kept_samples() const;
};

/// Fills the model-dependent defaults of a mixture configuration: for the nn variant
/// a missing fixed_alpha becomes the Gaussian-mixture MLE (hierarchical model) or 100
/// (O-U model); the toy model fixes theta and nu at the data's values.
MixtureConfig resolve_mixture(const ModelData& data, MixtureConfig config);

struct ChainOutput {
  ModelKind model = ModelKind::Hier;
  ErrorVariant variant = ErrorVariant::Gaussian;
  std::uint64_t stream_id = 0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  /// Post-burn-in acceptance rate per Metropolis-Hastings step ("A", "tau", "nu").
  std::map<std::string, double> acceptance;
  /// Proposal scales frozen at the end of burn-in.
  std::map<std::string, double> proposal_scale;
  /// Running means over kept draws of z_i and of the latent vector (mu_i or Y(t_i)).
  std::vector<double> z_mean;
  std::vector<double> latent_mean;
  /// alpha used by the nn variant, when applicable.
  std::optional<double> fixed_alpha;
  double seconds = 0.0;

  const std::vector<double>& column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  std::size_t kept() const { return columns.empty() ? 0 : columns.front().size(); }
};

/// Runs one chain of the extended Gibbs sampler. The model conditionals and the mixture
/// updates draw from separate substreams of (config.seed, stream_id), so a mixture run
/// whose indicators stay at zero reproduces the Gaussian run draw for draw.
/// Throws ChainDiverged when the state stops being finite.
ChainOutput run_chain(const ModelData& data, const ChainConfig& config, std::uint64_t stream_id);

/// n_chains independent chains with stream ids 1..n_chains, run on up to `threads`
/// workers (0: RMIX_THREADS or the hardware concurrency). Output is ordered by stream id
/// and does not depend on the number of workers.
std::vector<ChainOutput> run_ensemble(const ModelData& data, const ChainConfig& config,
                                      unsigned threads = 0);

/// Worker count from RMIX_THREADS, falling back to std::thread::hardware_concurrency().
unsigned default_thread_count();

}  // namespace rmix
