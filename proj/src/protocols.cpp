#include "rmix/protocols.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rmix/error.hpp"
#include "rmix/io.hpp"

namespace rmix {

using nlohmann::json;

namespace {

struct HospitalRow {
  double y, sd, y_sim;
};

constexpr std::array<HospitalRow, 31> kHospitals{{
    {-2.07, 2.78, 1.72},  {-0.22, 2.76, -1.56}, {0.58, 1.57, 0.95},   {-1.87, 1.42, 0.36},
    {-0.74, 1.39, 0.00},  {-1.97, 1.37, -1.39}, {-1.90, 1.36, 1.64},  {2.31, 1.32, -1.97},
    {-0.14, 1.22, -1.60}, {-1.21, 1.22, -1.09}, {-1.43, 1.20, -0.45}, {1.56, 1.14, -0.55},
    {0.00, 1.10, 0.01},   {0.41, 1.08, 2.98},   {0.08, 1.04, 0.81},   {-2.15, 1.03, 0.24},
    {-0.34, 1.02, 0.57},  {0.86, 1.02, 0.36},   {0.01, 1.01, 1.34},   {1.11, 0.98, 1.66},
    {-0.08, 0.96, 0.02},  {0.61, 0.93, -0.40},  {2.05, 0.93, 1.52},   {0.57, 0.91, -0.49},
    {1.10, 0.90, 0.54},   {-2.42, 0.84, 0.41},  {-0.38, 0.78, 0.05},  {0.07, 0.75, -0.01},
    {0.96, 0.74, 0.59},   {-0.21, 0.66, -2.03}, {1.14, 0.62, 0.51},
}};

const std::set<std::string> kProtocols{"hosp-sim", "hosp-outlier", "sens-beta-prior",
                                       "sens-size-grid", "ou-sim", "ou-sens"};

bool is_sensitivity(const std::string& p) {
  return p == "sens-beta-prior" || p == "sens-size-grid" || p == "ou-sens";
}

bool is_ou(const std::string& p) { return p == "ou-sim" || p == "ou-sens"; }

std::string file_label(std::string s) {
  for (char& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  }
  return s;
}

template <class Fn>
std::string to_text(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Data streams use stream id 0 so they never collide with chains (ids 1..n_chains).
RngStream data_stream(const ExperimentSpec& spec, std::uint64_t substream) {
  return RngStream(spec.seed, 0, substream);
}

PriorChoice parse_prior(const json& j) {
  PriorChoice p;
  if (j.is_string()) {
    if (j.get<std::string>() != "uniform") throw ParseError("prior must be an object or \"uniform\"", 0);
    p.uniform = true;
    return p;
  }
  if (!j.is_object()) throw ParseError("prior must be an object or \"uniform\"", 0);
  for (const auto& [key, value] : j.items()) {
    if (key == "k") {
      p.k_fixed = value.get<double>();
    } else if (key == "k_fraction") {
      p.k_fraction = value.get<double>();
    } else if (key == "m") {
      p.m = value.get<double>();
    } else if (key == "uniform") {
      p.uniform = value.get<bool>();
    } else {
      throw ParseError("unknown prior key '" + key + "'", 0);
    }
  }
  return p;
}

json prior_json(const PriorChoice& p) {
  if (p.uniform) return "uniform";
  json j{{"m", p.m}};
  if (p.k_fixed) {
    j["k"] = *p.k_fixed;
  } else {
    j["k_fraction"] = p.k_fraction;
  }
  return j;
}

std::vector<PriorChoice> default_prior_grid() {
  PriorChoice strong;
  PriorChoice weak;
  weak.k_fraction = 0.2;
  PriorChoice flat;
  flat.uniform = true;
  return {strong, weak, flat};
}

MixtureConfig mixture_for(ErrorVariant v, const PriorChoice& prior, std::size_t n) {
  if (prior.uniform) return MixtureConfig::uniform_prior(v);
  MixtureConfig cfg;
  cfg.variant = v;
  cfg.k = prior.k_for(n);
  cfg.m = prior.m;
  return cfg;
}

std::vector<double> pooled(const std::vector<ChainOutput>& chains, const std::string& name) {
  std::vector<double> out;
  for (const auto& c : chains) {
    const auto& col = c.column(name);
    out.insert(out.end(), col.begin(), col.end());
  }
  return out;
}

std::vector<double> mean_z(const std::vector<ChainOutput>& chains) {
  std::vector<double> z(chains.front().z_mean.size(), 0.0);
  for (const auto& c : chains) {
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += c.z_mean[i];
  }
  for (auto& v : z) v /= static_cast<double>(chains.size());
  return z;
}

struct Case {
  std::string label;
  ModelData data;
  std::vector<std::pair<std::string, ChainConfig>> fits;
  std::optional<std::map<std::string, double>> generative;
};

void add_fit(Case& c, const std::string& label, const ChainConfig& base, ErrorVariant v,
             const PriorChoice& prior, std::size_t n) {
  ChainConfig cfg = base;
  cfg.mixture = mixture_for(v, prior, n);
  c.fits.emplace_back(label, cfg);
}

void add_variant_fits(Case& c, const ExperimentSpec& spec, std::size_t n) {
  for (ErrorVariant v : spec.variants) add_fit(c, variant_code(v), spec.chain, v, spec.prior, n);
}

void add_grid_fits(Case& c, const ExperimentSpec& spec, std::size_t n) {
  for (ErrorVariant v : spec.variants) {
    if (v == ErrorVariant::ProposedMixture || v == ErrorVariant::GaussianMixture) {
      for (const auto& p : spec.priors) {
        add_fit(c, variant_code(v) + "[" + p.label(n) + "]", spec.chain, v, p, n);
      }
    } else {
      add_fit(c, variant_code(v), spec.chain, v, spec.prior, n);
    }
  }
}

HierData hospital_base(const ExperimentSpec& spec) {
  const HospitalTable table = paper_dataset_hospital();
  if (spec.use_table_ysim && spec.errors == ErrorKind::Gaussian) return {table.y_sim, table.data.V};
  RngStream rng = data_stream(spec, 1);
  return {simulate_hier(spec.beta_gen, spec.A_gen, table.data.V, spec.errors, rng).y, table.data.V};
}

TimeSeries ou_dataset(const ExperimentSpec& spec) {
  const TimeSeries templ = spec.series_path ? read_timeseries_csv(*spec.series_path)
                                            : synthetic_macho_template(spec.seed);
  RngStream rng = data_stream(spec, 2);
  if (spec.errors == ErrorKind::T4) {
    TimeSeries s = templ;
    s.y = ou_simulate(templ.t, spec.ou_gen.mu, spec.ou_gen.sigma2, spec.ou_gen.tau, templ.V,
                      ErrorKind::T4, rng)
              .y;
    return s;
  }
  return simulate_macho_like(templ, spec.ou_gen, spec.ou_outliers, spec.repeats, rng).series;
}

std::vector<Case> build_cases(const ExperimentSpec& spec) {
  std::vector<Case> cases;
  const std::string& p = spec.protocol;
  if (p == "hosp-sim" || p == "hosp-outlier" || p == "sens-beta-prior") {
    HierData d = hospital_base(spec);
    d.y = inject_outliers(d.y, d.V, spec.outliers);
    Case c{p, d, {}, {}};
    if (p == "sens-beta-prior") {
      add_grid_fits(c, spec, d.size());
    } else {
      add_variant_fits(c, spec, d.size());
    }
    cases.push_back(std::move(c));
  } else if (p == "sens-size-grid") {
    const std::size_t n_max = *std::max_element(spec.sizes.begin(), spec.sizes.end());
    RngStream rng = data_stream(spec, 3);
    std::vector<double> base(n_max);
    for (auto& v : base) v = sample_normal(spec.beta_gen, 1.0 + spec.grid_A_gen, rng);
    std::size_t cell = 0;
    for (std::size_t n : spec.sizes) {
      for (double prop : spec.proportions) {
        RngStream out_rng = data_stream(spec, 100 + cell++);
        const std::vector<double> first(base.begin(), base.begin() + static_cast<std::ptrdiff_t>(n));
        HierData d{replace_with_outliers(first, prop, spec.outlier_sd, out_rng),
                   std::vector<double>(n, 1.0)};
        const auto pct = static_cast<int>(std::lround(prop * 100.0));
        Case c{"n" + std::to_string(n) + "_p" + std::to_string(pct), d, {}, {}};
        add_grid_fits(c, spec, n);
        cases.push_back(std::move(c));
      }
    }
  } else {
    const TimeSeries s = ou_dataset(spec);
    Case c{p, s, {}, {}};
    if (p == "ou-sens") {
      add_grid_fits(c, spec, s.size());
    } else {
      add_variant_fits(c, spec, s.size());
    }
    cases.push_back(std::move(c));
  }
  return cases;
}

void write_case_data(const std::filesystem::path& dir, const Case& c) {
  write_text_file(dir / "data" / (file_label(c.label) + ".csv"), to_text([&](std::ostream& os) {
                    if (const auto* toy = std::get_if<ToyData>(&c.data)) {
                      write_toy_csv(os, *toy);
                    } else if (const auto* h = std::get_if<HierData>(&c.data)) {
                      write_hospital_csv(os, *h);
                    } else {
                      write_timeseries_csv(os, std::get<TimeSeries>(c.data));
                    }
                  }));
}

void write_fit_outputs(const std::filesystem::path& dir, const FitRecord& fit) {
  const std::string c = file_label(fit.case_label);
  const std::string f = file_label(fit.fit_label);
  for (const auto& chain : fit.chains) {
    write_text_file(dir / "chains" / c / (f + "_chain" + std::to_string(chain.stream_id) + ".csv"),
                    to_text([&](std::ostream& os) { write_chain_csv(os, chain); }));
  }
  if (fit.chains.empty()) return;
  const auto& first = fit.chains.front();
  if (first.variant != ErrorVariant::Gaussian && first.variant != ErrorVariant::StudentT) {
    write_text_file(dir / "figures-data" / c / ("zmean_" + f + ".csv"),
                    to_text([&](std::ostream& os) { write_zmean_csv(os, mean_z(fit.chains)); }));
  }
  for (const auto& name : first.names) {
    const auto all = pooled(fit.chains, name);
    write_text_file(dir / "figures-data" / c / ("density_" + f + "_" + name + ".csv"),
                    to_text([&](std::ostream& os) { write_density_csv(os, kde_grid(all), name); }));
    write_text_file(dir / "figures-data" / c / ("acf_" + f + "_" + name + ".csv"),
                    to_text([&](std::ostream& os) {
                      write_acf_csv(os, autocorrelation(first.column(name), std::min<std::size_t>(50, first.kept() - 1)));
                    }));
  }
}

json fit_json(const FitRecord& fit, const ExperimentSpec& spec) {
  json j{{"case", fit.case_label}, {"fit", fit.fit_label}, {"variant", variant_code(fit.variant)}};
  if (fit.failure) j["failure"] = *fit.failure;
  json rows = json::array();
  for (const auto& r : fit.rows) {
    rows.push_back({{"parameter", r.parameter},
                    {"mean", r.mean},
                    {"mc_error", r.mc_error},
                    {"bias", opt_json(r.bias)},
                    {"mse", opt_json(r.mse)},
                    {"mse_ratio", opt_json(r.mse_ratio)},
                    {"interval", {r.interval_lo, r.interval_hi}},
                    {"interval_length", r.interval_length()},
                    {"ess", r.ess},
                    {"cpu_seconds", opt_json(r.cpu_seconds)}});
  }
  j["summary"] = rows;
  json chains = json::array();
  for (const auto& c : fit.chains) {
    json cj{{"stream_id", c.stream_id}, {"kept", c.kept()}, {"acceptance", c.acceptance},
            {"proposal_scale", c.proposal_scale}};
    if (c.fixed_alpha) cj["fixed_alpha"] = *c.fixed_alpha;
    if (spec.record_timing) cj["seconds"] = c.seconds;
    chains.push_back(cj);
  }
  j["chains"] = chains;
  if (!fit.chains.empty() && fit.chains.front().variant != ErrorVariant::Gaussian &&
      fit.chains.front().variant != ErrorVariant::StudentT) {
    const auto z = mean_z(fit.chains);
    json flagged = json::array();
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (z[i] > spec.z_threshold) flagged.push_back(i + 1);
    }
    j["flagged"] = flagged;
  }
  return j;
}

}  // namespace

HospitalTable paper_dataset_hospital() {
  HospitalTable t;
  for (const auto& r : kHospitals) {
    t.data.y.push_back(r.y);
    t.data.V.push_back(r.sd * r.sd);
    t.y_sim.push_back(r.y_sim);
  }
  return t;
}

std::vector<OutlierShift> hospital_outlier_shifts() { return {{0, 4.0}, {1, -5.0}, {2, 6.0}}; }

HierData hospital_outlier_data() {
  const HospitalTable t = paper_dataset_hospital();
  const auto shifts = hospital_outlier_shifts();
  return {inject_outliers(t.y_sim, t.data.V, shifts), t.data.V};
}

TimeSeries synthetic_macho_template(std::uint64_t seed) {
  RngStream rng(seed, 0, 9);
  TimeSeries s;
  constexpr std::size_t kSeasons = 8;
  constexpr std::size_t kPoints = 242;
  double t = 0.0;
  for (std::size_t season = 0; season < kSeasons; ++season) {
    const std::size_t count = kPoints / kSeasons + (season < kPoints % kSeasons ? 1 : 0);
    for (std::size_t j = 0; j < count; ++j) {
      t += 1.0 + 7.0 * rng.exponential();
      s.t.push_back(t);
      const double sd = 0.01 + 0.02 * rng.uniform();
      s.V.push_back(sd * sd);
    }
    t += 120.0;
  }
  const OUParams g = kMachoGenerative;
  s.y = ou_simulate(s.t, g.mu, g.sigma2, g.tau, s.V, ErrorKind::Gaussian, rng).y;
  double sign = 1.0;
  for (std::size_t idx1 : kMachoOutliers1) {
    const std::size_t i = idx1 - 1;
    s.y[i] += sign * (8.0 + 4.0 * rng.uniform()) * std::sqrt(s.V[i]);
    sign = -sign;
  }
  return s;
}

double PriorChoice::k_for(std::size_t n) const {
  if (uniform) return 2.0;
  return k_fixed ? *k_fixed : k_fraction * static_cast<double>(n);
}

std::string PriorChoice::label(std::size_t n) const {
  if (uniform) return "uniform";
  return "k=" + format_double(k_for(n)) + ",m=" + format_double(m);
}

void ExperimentSpec::validate() const {
  if (!kProtocols.count(protocol)) throw InvalidParameter("unknown protocol '" + protocol + "'");
  if (variants.empty()) throw InvalidParameter("no variants to fit");
  chain.validate();
  if (is_sensitivity(protocol) && priors.empty()) throw InvalidParameter("empty prior grid");
  if (protocol == "sens-size-grid") {
    if (sizes.empty() || proportions.empty()) throw InvalidParameter("empty size grid");
    for (std::size_t n : sizes) {
      if (n < 4) throw InvalidParameter("grid sizes must be at least 4");
    }
    for (double p : proportions) {
      if (!(p >= 0.0 && p <= 1.0)) throw InvalidParameter("proportions must lie in [0, 1]");
    }
  }
  if (!(A_gen >= 0.0) || !(grid_A_gen >= 0.0)) throw InvalidParameter("A_gen must be non-negative");
  if (!(ou_gen.sigma2 > 0.0) || !(ou_gen.tau > 0.0)) throw InvalidParameter("need sigma^2 > 0 and tau > 0");
  if (repeats < 1) throw InvalidParameter("repeats must be at least 1");
  if (!(z_threshold >= 0.0 && z_threshold <= 1.0)) throw InvalidParameter("z threshold must lie in [0, 1]");
  for (const auto& p : priors) {
    if (!p.uniform && !(p.m > 0.0 && p.m < 1.0)) throw InvalidParameter("prior m must lie in (0, 1)");
  }
}

ExperimentSpec parse_experiment_spec(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("experiment spec: ") + e.what(), 0);
  }
  if (!j.is_object()) throw ParseError("experiment spec must be a JSON object", 0);
  if (!j.contains("protocol")) throw ParseError("experiment spec needs \"protocol\"", 0);
  if (!j.contains("seed")) throw ParseError("experiment spec needs \"seed\"", 0);

  ExperimentSpec s;
  bool variants_given = false;
  bool priors_given = false;
  bool outliers_given = false;
  bool ou_outliers_given = false;
  bool prior_given = false;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "protocol") {
        s.protocol = v.get<std::string>();
      } else if (key == "seed") {
        s.seed = v.get<std::uint64_t>();
      } else if (key == "chain") {
        for (const auto& [ck, cv] : v.items()) {
          if (ck == "n_iter") {
            s.chain.n_iter = cv.get<std::size_t>();
          } else if (ck == "burn_in") {
            s.chain.burn_in = cv.get<std::size_t>();
          } else if (ck == "thin") {
            s.chain.thin = cv.get<std::size_t>();
          } else if (ck == "n_chains") {
            s.chain.n_chains = cv.get<std::size_t>();
          } else if (ck == "target_acceptance") {
            s.chain.target_acceptance = cv.get<double>();
          } else {
            throw ParseError("unknown chain key '" + ck + "'", 0);
          }
        }
      } else if (key == "variants") {
        variants_given = true;
        for (const auto& code : v) s.variants.push_back(parse_variant(code.get<std::string>()));
      } else if (key == "prior") {
        prior_given = true;
        s.prior = parse_prior(v);
      } else if (key == "priors") {
        priors_given = true;
        for (const auto& p : v) s.priors.push_back(parse_prior(p));
      } else if (key == "errors") {
        const auto e = v.get<std::string>();
        if (e == "gaussian") {
          s.errors = ErrorKind::Gaussian;
        } else if (e == "t4") {
          s.errors = ErrorKind::T4;
        } else {
          throw ParseError("errors must be \"gaussian\" or \"t4\"", 0);
        }
      } else if (key == "generative") {
        for (const auto& [gk, gv] : v.items()) {
          if (gk == "beta") {
            s.beta_gen = gv.get<double>();
          } else if (gk == "A") {
            s.A_gen = gv.get<double>();
            s.grid_A_gen = gv.get<double>();
          } else if (gk == "mu") {
            s.ou_gen.mu = gv.get<double>();
          } else if (gk == "sigma2") {
            s.ou_gen.sigma2 = gv.get<double>();
          } else if (gk == "tau") {
            s.ou_gen.tau = gv.get<double>();
          } else {
            throw ParseError("unknown generative key '" + gk + "'", 0);
          }
        }
      } else if (key == "use_table_ysim") {
        s.use_table_ysim = v.get<bool>();
      } else if (key == "outliers") {
        outliers_given = true;
        for (const auto& o : v) {
          const auto idx = o.at("index").get<std::size_t>();
          if (idx < 1) throw ParseError("outlier indices are 1-based", 0);
          s.outliers.push_back({idx - 1, o.at("multiplier").get<double>()});
        }
      } else if (key == "sizes") {
        s.sizes = v.get<std::vector<std::size_t>>();
      } else if (key == "proportions") {
        s.proportions = v.get<std::vector<double>>();
      } else if (key == "outlier_sd") {
        s.outlier_sd = v.get<double>();
      } else if (key == "series") {
        s.series_path = v.get<std::string>();
      } else if (key == "ou_outliers") {
        ou_outliers_given = true;
        for (auto idx : v.get<std::vector<std::size_t>>()) {
          if (idx < 1) throw ParseError("outlier indices are 1-based", 0);
          s.ou_outliers.push_back(idx - 1);
        }
      } else if (key == "repeats") {
        s.repeats = v.get<std::size_t>();
      } else if (key == "z_threshold") {
        s.z_threshold = v.get<double>();
      } else if (key == "record_timing") {
        s.record_timing = v.get<bool>();
      } else if (key == "threads") {
        s.threads = v.get<unsigned>();
      } else {
        throw ParseError("unknown experiment key '" + key + "'", 0);
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("experiment spec: ") + e.what(), 0);
  }
  if (!kProtocols.count(s.protocol)) throw ParseError("unknown protocol '" + s.protocol + "'", 0);

  const std::string& p = s.protocol;
  if (!variants_given) {
    if (is_sensitivity(p)) {
      s.variants = {ErrorVariant::StudentT, ErrorVariant::ProposedMixture};
    } else {
      s.variants = {ErrorVariant::Gaussian, ErrorVariant::StudentT, ErrorVariant::GaussianMixture,
                    ErrorVariant::ProposedMixture};
    }
  }
  if (!priors_given) s.priors = default_prior_grid();
  if (!prior_given) s.prior = PriorChoice{};
  if (!outliers_given && (p == "hosp-outlier" || (p == "sens-beta-prior" && s.errors == ErrorKind::Gaussian))) {
    s.outliers = hospital_outlier_shifts();
  }
  if (!ou_outliers_given && is_ou(p) && s.errors == ErrorKind::Gaussian) {
    for (std::size_t idx1 : kMachoOutliers1) s.ou_outliers.push_back(idx1 - 1);
  }
  if (p == "sens-size-grid" && !j.contains("generative")) s.beta_gen = 0.0;
  s.validate();
  return s;
}

std::string experiment_spec_json(const ExperimentSpec& s) {
  json j;
  j["protocol"] = s.protocol;
  j["seed"] = s.seed;
  j["chain"] = {{"n_iter", s.chain.n_iter},
                {"burn_in", s.chain.burn_in},
                {"thin", s.chain.thin},
                {"n_chains", s.chain.n_chains},
                {"target_acceptance", s.chain.target_acceptance}};
  json variants = json::array();
  for (auto v : s.variants) variants.push_back(variant_code(v));
  j["variants"] = variants;
  j["prior"] = prior_json(s.prior);
  json priors = json::array();
  for (const auto& p : s.priors) priors.push_back(prior_json(p));
  j["priors"] = priors;
  j["errors"] = s.errors == ErrorKind::Gaussian ? "gaussian" : "t4";
  if (is_ou(s.protocol)) {
    j["generative"] = {{"mu", s.ou_gen.mu}, {"sigma2", s.ou_gen.sigma2}, {"tau", s.ou_gen.tau}};
    if (s.series_path) j["series"] = s.series_path->string();
    json idx = json::array();
    for (auto i : s.ou_outliers) idx.push_back(i + 1);
    j["ou_outliers"] = idx;
    j["repeats"] = s.repeats;
    j["z_threshold"] = s.z_threshold;
  } else {
    const double A = s.protocol == "sens-size-grid" ? s.grid_A_gen : s.A_gen;
    j["generative"] = {{"beta", s.beta_gen}, {"A", A}};
    json out = json::array();
    for (const auto& o : s.outliers) out.push_back({{"index", o.index + 1}, {"multiplier", o.multiplier}});
    j["outliers"] = out;
    if (s.protocol == "sens-size-grid") {
      j["sizes"] = s.sizes;
      j["proportions"] = s.proportions;
      j["outlier_sd"] = s.outlier_sd;
    } else {
      j["use_table_ysim"] = s.use_table_ysim;
    }
  }
  j["record_timing"] = s.record_timing;
  return j.dump(2);
}

bool ExperimentResult::any_failure() const {
  return std::any_of(fits.begin(), fits.end(), [](const auto& f) { return f.failure.has_value(); });
}

bool ExperimentResult::any_divergence() const {
  return std::any_of(fits.begin(), fits.end(), [](const auto& f) { return f.diverged; });
}

const FitRecord& ExperimentResult::fit(const std::string& case_label, const std::string& fit_label) const {
  for (const auto& f : fits) {
    if (f.case_label == case_label && f.fit_label == fit_label) return f;
  }
  throw InvalidParameter("no fit " + case_label + "/" + fit_label);
}

std::map<std::string, double> generative_values(ModelKind model, const ExperimentSpec& spec) {
  switch (model) {
    case ModelKind::Hier: {
      const double A = spec.protocol == "sens-size-grid" ? spec.grid_A_gen : spec.A_gen;
      return {{"beta", spec.beta_gen}, {"log_A", std::log(A)}};
    }
    case ModelKind::OU:
      return {{"mu", spec.ou_gen.mu},
              {"log_sigma", 0.5 * std::log(spec.ou_gen.sigma2)},
              {"log_tau", std::log(spec.ou_gen.tau)}};
    case ModelKind::Toy:
      break;
  }
  return {};
}

FitRecord fit_and_summarize(const ModelData& data, ChainConfig chain,
                            const std::map<std::string, double>& generative, bool record_timing,
                            unsigned threads) {
  FitRecord fit;
  fit.variant = chain.mixture.variant;
  try {
    chain.mixture = resolve_mixture(data, chain.mixture);
    fit.chains = run_ensemble(data, chain, threads);
  } catch (const ChainDiverged& e) {
    fit.failure = e.what();
    fit.diverged = true;
    return fit;
  } catch (const OptimizationFailure& e) {
    fit.failure = e.what();
    return fit;
  }
  double seconds = 0.0;
  for (const auto& c : fit.chains) seconds += c.seconds;
  for (const auto& name : fit.chains.front().names) {
    std::vector<std::vector<double>> per_chain;
    for (const auto& c : fit.chains) per_chain.push_back(c.column(name));
    const auto g = generative.find(name);
    fit.rows.push_back(summarize(name, per_chain,
                                 g == generative.end() ? std::nullopt : std::optional<double>(g->second),
                                 std::nullopt, record_timing ? std::optional<double>(seconds) : std::nullopt));
  }
  return fit;
}

void attach_mse_ratios(std::vector<FitRecord>& fits, const std::string& reference) {
  for (auto& f : fits) {
    const FitRecord* ref = nullptr;
    for (const auto& g : fits) {
      if (g.case_label == f.case_label && g.fit_label == reference && !g.failure) ref = &g;
    }
    if (!ref) continue;
    for (auto& row : f.rows) {
      for (const auto& r : ref->rows) {
        if (r.parameter == row.parameter && r.mse && row.mse && *row.mse > 0.0) {
          row.mse_ratio = *row.mse == *r.mse ? 1.0 : *r.mse / *row.mse;
        }
      }
    }
  }
}

namespace {

ExperimentResult run_cases(const ExperimentSpec& spec, const std::vector<Case>& cases,
                           const std::filesystem::path& out_dir) {
  ExperimentResult result;
  for (const auto& c : cases) {
    if (!out_dir.empty()) write_case_data(out_dir, c);
    const auto generative = c.generative ? *c.generative : generative_values(model_kind(c.data), spec);
    for (const auto& [label, cfg] : c.fits) {
      ChainConfig chain = cfg;
      chain.seed = spec.seed;
      FitRecord fit = fit_and_summarize(c.data, chain, generative, spec.record_timing, spec.threads);
      fit.case_label = c.label;
      fit.fit_label = label;
      result.fits.push_back(std::move(fit));
    }
  }
  attach_mse_ratios(result.fits, variant_code(ErrorVariant::ProposedMixture));

  if (is_sensitivity(spec.protocol)) {
    for (const auto& f : result.fits) {
      if (f.failure || f.variant == ErrorVariant::StudentT) continue;
      const FitRecord* t = nullptr;
      for (const auto& g : result.fits) {
        if (g.case_label == f.case_label && g.variant == ErrorVariant::StudentT && !g.failure) t = &g;
      }
      if (!t) continue;
      for (const auto& row : f.rows) {
        if (!t->chains.front().has_column(row.parameter)) continue;
        const double tv = total_variation_histogram(pooled(f.chains, row.parameter),
                                                    pooled(t->chains, row.parameter));
        result.tv_to_t.emplace_back(f.case_label, f.fit_label, row.parameter, tv);
      }
    }
  }

  if (out_dir.empty()) return result;

  std::vector<SummaryRow> rows;
  std::vector<std::string> labels;
  json fits = json::array();
  json failures = json::array();
  for (const auto& f : result.fits) {
    for (const auto& r : f.rows) {
      rows.push_back(r);
      labels.push_back(f.case_label + "," + f.fit_label);
    }
    fits.push_back(fit_json(f, spec));
    if (f.failure) failures.push_back({{"case", f.case_label}, {"fit", f.fit_label}, {"error", *f.failure}});
    write_fit_outputs(out_dir, f);
  }
  write_text_file(out_dir / "reports" / "summary.csv",
                  to_text([&](std::ostream& os) { write_summary_csv(os, rows, labels, "case,fit"); }));
  write_text_file(out_dir / "reports" / "summary.json", json(fits).dump(2) + "\n");
  if (!result.tv_to_t.empty()) {
    write_text_file(out_dir / "reports" / "tv_to_t.csv", to_text([&](std::ostream& os) {
                      os << "case,fit,parameter,tv\n";
                      for (const auto& [c, f, p, tv] : result.tv_to_t) {
                        os << c << ',' << f << ',' << p << ',' << format_double(tv) << '\n';
                      }
                    }));
  }
  json manifest{{"spec", json::parse(experiment_spec_json(spec))}, {"failures", failures}};
  write_text_file(out_dir / "reports" / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  return run_cases(spec, build_cases(spec), out_dir);
}

ExperimentResult fit_dataset(const ExperimentSpec& spec, const ModelData& data,
                             const std::string& label, bool prior_grid,
                             const std::map<std::string, double>& generative,
                             const std::filesystem::path& out_dir) {
  spec.chain.validate();
  if (spec.variants.empty()) throw InvalidParameter("no variants to fit");
  Case c{label, data, {}, generative};
  const std::size_t n = std::visit([](const auto& d) { return d.size(); }, data);
  if (prior_grid) {
    add_grid_fits(c, spec, n);
  } else {
    add_variant_fits(c, spec, n);
  }
  return run_cases(spec, {c}, out_dir);
}

}  // namespace rmix
