#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "rmix/diagnostics.hpp"
#include "rmix/engine.hpp"
#include "rmix/hier_model.hpp"
#include "rmix/ou_model.hpp"

namespace rmix {

/// The 31 hospitals of the profiling example: observed y, V = sd^2, and the simulated
/// y_sim drawn at beta = 0, A = 0.722.
struct HospitalTable {
  HierData data;
  std::vector<double> y_sim;
};
HospitalTable paper_dataset_hospital();

/// Shifts of +4, -5 and +6 measurement SDs on hospitals 1, 2, 3 (0-based 0, 1, 2).
std::vector<OutlierShift> hospital_outlier_shifts();
/// y_sim with the three shifts applied (12.84, -15.36, 10.37 up to rounding).
HierData hospital_outlier_data();

/// Generative values of the light-curve simulation: mu, sigma^2, tau.
inline constexpr OUParams kMachoGenerative{17.667, 0.018 * 0.018, 284.066};
/// 1-based positions of the seven flagged observations in the 242-point light curve.
inline constexpr std::size_t kMachoOutliers1[] = {155, 163, 189, 191, 199, 200, 217};

/// Stand-in for the real photometry (not distributed): 242 nightly epochs over eight
/// observing seasons, measurement SDs in [0.01, 0.03], a curve drawn at the generative
/// values, and the seven flagged points pushed 8-12 SDs away.
TimeSeries synthetic_macho_template(std::uint64_t seed);

/// Prior on theta for a grid cell: Beta(k m, k (1 - m)) with k = k_fixed, or k = k_fraction * n.
struct PriorChoice {
  std::optional<double> k_fixed;
  double k_fraction = 1.0;
  double m = 0.01;
  bool uniform = false;

  double k_for(std::size_t n) const;
  std::string label(std::size_t n) const;
};

struct ExperimentSpec {
  std::string protocol;  ///< hosp-sim, hosp-outlier, sens-beta-prior, sens-size-grid, ou-sim, ou-sens
  std::uint64_t seed = 0;
  ChainConfig chain;
  std::vector<ErrorVariant> variants;
  PriorChoice prior;               ///< theta prior for the main fits (default k = n, m = 0.01)
  std::vector<PriorChoice> priors; ///< grid for the sensitivity protocols
  ErrorKind errors = ErrorKind::Gaussian;

  // hierarchical protocols
  double beta_gen = 0.0;
  double A_gen = 0.722;
  bool use_table_ysim = true;
  std::vector<OutlierShift> outliers;
  std::vector<std::size_t> sizes{20, 50, 100};
  std::vector<double> proportions{0.1, 0.2, 0.3};
  double grid_A_gen = 1.0;
  double outlier_sd = 20.0;

  // light-curve protocols
  OUParams ou_gen = kMachoGenerative;
  std::optional<std::filesystem::path> series_path;
  std::vector<std::size_t> ou_outliers;  ///< 0-based
  std::size_t repeats = 10000;
  double z_threshold = 0.3;

  bool record_timing = false;
  unsigned threads = 0;

  void validate() const;
};

/// Parses a JSON experiment spec and fills protocol defaults. Throws ParseError or
/// InvalidParameter.
ExperimentSpec parse_experiment_spec(const std::string& json_text);
std::string experiment_spec_json(const ExperimentSpec& spec);

/// One fitted (data set, variant, prior) combination.
struct FitRecord {
  std::string case_label;
  std::string fit_label;
  ErrorVariant variant = ErrorVariant::ProposedMixture;
  std::vector<ChainOutput> chains;
  std::vector<SummaryRow> rows;
  std::optional<std::string> failure;
  bool diverged = false;
};

struct ExperimentResult {
  std::vector<FitRecord> fits;
  /// Total variation to the t fit of the same case, per (fit label, parameter).
  std::vector<std::tuple<std::string, std::string, std::string, double>> tv_to_t;
  bool any_failure() const;
  bool any_divergence() const;
  const FitRecord& fit(const std::string& case_label, const std::string& fit_label) const;
};

/// Monitored scalars with a known generative value, for one model.
std::map<std::string, double> generative_values(ModelKind model, const ExperimentSpec& spec);

/// Runs the ensemble for one variant and summarizes every monitored scalar.
FitRecord fit_and_summarize(const ModelData& data, ChainConfig chain,
                            const std::map<std::string, double>& generative,
                            bool record_timing, unsigned threads);

/// Computes mse_ratio against the fit labelled `reference` in each case.
void attach_mse_ratios(std::vector<FitRecord>& fits, const std::string& reference);

/// Generates data, fits, summarizes; writes data/, chains/, reports/ and figures-data/
/// under out_dir when it is non-empty. Chain failures are recorded, not thrown.
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir);

/// Fits spec.variants (each nt/nn variant once per spec.priors entry when prior_grid)
/// on caller-supplied data and writes the same bundle layout as run_experiment.
ExperimentResult fit_dataset(const ExperimentSpec& spec, const ModelData& data,
                             const std::string& label, bool prior_grid,
                             const std::map<std::string, double>& generative,
                             const std::filesystem::path& out_dir);

}  // namespace rmix
