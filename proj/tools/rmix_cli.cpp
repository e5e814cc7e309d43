#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rmix/diagnostics.hpp"
#include "rmix/error.hpp"
#include "rmix/io.hpp"
#include "rmix/protocols.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rmix;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kDiverged = 2;

struct ChainFlags {
  std::size_t iters = 100000;
  std::size_t burn_in = 10000;
  std::size_t thin = 1;
  std::size_t chains = 4;
  std::uint64_t seed = 0;
  double k = -1.0;
  double m = 0.01;
  bool uniform = false;
  unsigned threads = 0;
  bool timing = false;

  void add_to(CLI::App* app, bool with_seed = true) {
    app->add_option("--iters", iters, "Iterations per chain, burn-in included")->capture_default_str();
    app->add_option("--burn-in", burn_in, "Burn-in iterations")->capture_default_str();
    app->add_option("--thin", thin, "Keep every thin-th draw")->capture_default_str();
    app->add_option("--chains", chains, "Independent chains")->capture_default_str();
    if (with_seed) app->add_option("--seed", seed, "Master seed")->required();
    app->add_option("--k", k, "Beta prior pseudo-count for theta (default: n)");
    app->add_option("--m", m, "Beta prior mean for theta")->capture_default_str();
    app->add_flag("--uniform-prior", uniform, "Uniform(0, 1) prior on theta");
    app->add_option("--threads", threads, "Worker threads (default: RMIX_THREADS or all cores)");
    app->add_flag("--timing", timing, "Record wall-clock seconds in reports");
  }

  ExperimentSpec spec(const std::string& label) const {
    ExperimentSpec s;
    s.protocol = label;
    s.seed = seed;
    s.chain.n_iter = iters;
    s.chain.burn_in = burn_in;
    s.chain.thin = thin;
    s.chain.n_chains = chains;
    s.prior.m = m;
    s.prior.uniform = uniform;
    if (k > 0.0) s.prior.k_fixed = k;
    s.record_timing = timing;
    s.threads = threads;
    return s;
  }
};

ModelData load_data(ModelKind model, const fs::path& path) {
  switch (model) {
    case ModelKind::Toy:
      return read_toy_csv(path);
    case ModelKind::Hier:
      return read_hospital_csv(path);
    case ModelKind::OU:
      return read_timeseries_csv(path);
  }
  throw InvalidParameter("unknown model");
}

std::map<std::string, double> parse_generative(const std::vector<std::string>& items) {
  std::map<std::string, double> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw InvalidParameter("--gen expects NAME=VALUE, got '" + item + "'");
    std::size_t used = 0;
    const std::string value = item.substr(eq + 1);
    const double v = std::stod(value, &used);
    if (used != value.size()) throw InvalidParameter("bad --gen value '" + value + "'");
    out[item.substr(0, eq)] = v;
  }
  return out;
}

std::vector<OutlierShift> parse_shifts(const std::vector<std::string>& items) {
  std::vector<OutlierShift> out;
  for (const auto& item : items) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw InvalidParameter("--shift expects INDEX:MULTIPLIER, got '" + item + "'");
    const long idx = std::stol(item.substr(0, colon));
    if (idx < 1) throw InvalidParameter("outlier indices are 1-based");
    out.push_back({static_cast<std::size_t>(idx - 1), std::stod(item.substr(colon + 1))});
  }
  return out;
}

int finish(const ExperimentResult& r, const fs::path& out) {
  for (const auto& f : r.fits) {
    if (f.failure) std::cerr << "fit " << f.case_label << "/" << f.fit_label << " failed: " << *f.failure << '\n';
  }
  std::cerr << "wrote " << out.string() << '\n';
  if (r.any_divergence()) return kDiverged;
  return r.any_failure() ? kUsage : kOk;
}

int run_fit(ModelKind model, const std::string& variant, const fs::path& data_path, const fs::path& out,
            const ChainFlags& flags, const std::vector<std::string>& gen, double z_threshold) {
  ExperimentSpec spec = flags.spec("fit");
  spec.variants = {parse_variant(variant)};
  spec.z_threshold = z_threshold;
  const ModelData data = load_data(model, data_path);
  const auto r = fit_dataset(spec, data, model_name(model), false, parse_generative(gen), out);
  return finish(r, out);
}

int run_sensitivity(ModelKind model, const fs::path& data_path, const fs::path& out, const ChainFlags& flags,
                    const std::vector<double>& k_fractions, const std::vector<double>& ms,
                    const std::vector<std::string>& gen) {
  ExperimentSpec spec = flags.spec("sensitivity");
  spec.variants = {ErrorVariant::StudentT, ErrorVariant::ProposedMixture};
  for (double m : ms) {
    for (double kf : k_fractions) {
      PriorChoice p;
      p.k_fraction = kf;
      p.m = m;
      spec.priors.push_back(p);
    }
  }
  PriorChoice flat;
  flat.uniform = true;
  spec.priors.push_back(flat);
  const ModelData data = load_data(model, data_path);
  const auto r = fit_dataset(spec, data, model_name(model), true, parse_generative(gen), out);
  return finish(r, out);
}

int run_simulate(ModelKind model, const std::optional<fs::path>& data_path, const fs::path& out,
                 std::uint64_t seed, const std::string& errors, const std::vector<std::string>& shift_items,
                 double beta, double A, double mu, double sigma2, double tau,
                 const std::vector<std::size_t>& ou_outliers, std::size_t repeats) {
  const ErrorKind kind = errors == "t4" ? ErrorKind::T4 : ErrorKind::Gaussian;
  RngStream rng(seed, 0, 1);
  json prov{{"seed", seed}, {"model", model_name(model)}, {"errors", errors}};
  if (model == ModelKind::Hier) {
    const HierData templ = data_path ? read_hospital_csv(*data_path) : paper_dataset_hospital().data;
    HierData d{simulate_hier(beta, A, templ.V, kind, rng).y, templ.V};
    const auto shifts = parse_shifts(shift_items);
    d.y = inject_outliers(d.y, d.V, shifts);
    std::ostringstream os;
    write_hospital_csv(os, d);
    write_text_file(out / "data.csv", os.str());
    json sj = json::array();
    for (const auto& s : shifts) sj.push_back({{"index", s.index + 1}, {"multiplier", s.multiplier}});
    prov["generative"] = {{"beta", beta}, {"A", A}};
    prov["outliers"] = sj;
  } else if (model == ModelKind::OU) {
    const TimeSeries templ = data_path ? read_timeseries_csv(*data_path) : synthetic_macho_template(seed);
    std::vector<std::size_t> idx0;
    for (auto i : ou_outliers) {
      if (i < 1) throw InvalidParameter("outlier indices are 1-based");
      idx0.push_back(i - 1);
    }
    const OUParams gen{mu, sigma2, tau};
    TimeSeries s = templ;
    double score = 0.0;
    if (kind == ErrorKind::T4) {
      s.y = ou_simulate(templ.t, mu, sigma2, tau, templ.V, kind, rng).y;
    } else {
      const auto sim = simulate_macho_like(templ, gen, idx0, repeats, rng);
      s = sim.series;
      score = sim.score;
    }
    std::ostringstream os;
    write_timeseries_csv(os, s);
    write_text_file(out / "data.csv", os.str());
    if (!data_path) {
      std::ostringstream ts;
      write_timeseries_csv(ts, templ);
      write_text_file(out / "template.csv", ts.str());
    }
    prov["generative"] = {{"mu", mu}, {"sigma2", sigma2}, {"tau", tau}};
    prov["outliers"] = ou_outliers;
    prov["repeats"] = repeats;
    prov["score"] = score;
  } else {
    throw InvalidParameter("simulate supports hier and ou");
  }
  if (data_path) prov["template"] = data_path->string();
  write_text_file(out / "provenance.json", prov.dump(2) + "\n");
  std::cerr << "wrote " << (out / "data.csv").string() << '\n';
  return kOk;
}

std::vector<fs::path> chain_files(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> files;
  for (const auto& p : inputs) {
    if (fs::is_directory(p)) {
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".csv" &&
            e.path().filename().string().find("_chain") != std::string::npos) {
          files.push_back(e.path());
        }
      }
    } else {
      files.push_back(p);
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InvalidParameter("no chain CSV files found");
  return files;
}

int run_diagnose(const std::vector<fs::path>& inputs, const fs::path& out, std::size_t max_lag,
                 std::optional<double> seconds) {
  const auto files = chain_files(inputs);
  std::ostringstream ess;
  ess << "file,parameter,n,ess,ess_per_draw" << (seconds ? ",ess_per_second" : "") << '\n';
  for (const auto& f : files) {
    const ChainTable t = read_chain_csv(f);
    const std::string stem = f.stem().string();
    for (std::size_t j = 0; j < t.names.size(); ++j) {
      const auto& x = t.columns[j];
      if (x.empty()) continue;
      const double e = effective_sample_size(x);
      if (e == 0.0) std::cerr << "warning: " << stem << "/" << t.names[j] << " is constant; ESS set to 0\n";
      std::ostringstream acf;
      write_acf_csv(acf, autocorrelation(x, std::min(max_lag, x.size() - 1)));
      write_text_file(out / ("acf_" + stem + "_" + t.names[j] + ".csv"), acf.str());
      ess << f.filename().string() << ',' << t.names[j] << ',' << x.size() << ',' << format_double(e) << ','
          << format_double(e / static_cast<double>(x.size()));
      if (seconds) ess << ',' << format_double(e / *seconds);
      ess << '\n';
    }
  }
  write_text_file(out / "ess.csv", ess.str());
  std::cerr << "wrote " << (out / "ess.csv").string() << '\n';
  return kOk;
}

std::optional<double> manifest_seconds(const std::vector<fs::path>& inputs) {
  for (const auto& p : inputs) {
    const fs::path m = fs::is_directory(p) ? p / "reports" / "summary.json" : fs::path();
    if (m.empty() || !fs::exists(m)) continue;
    std::ifstream in(m);
    const json j = json::parse(in);
    double total = 0.0;
    bool any = false;
    for (const auto& fit : j) {
      for (const auto& c : fit["chains"]) {
        if (c.contains("seconds")) {
          total += c["seconds"].get<double>();
          any = true;
        }
      }
    }
    if (any) return total;
  }
  return std::nullopt;
}

std::optional<double> opt_double(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

int run_report(const std::vector<fs::path>& inputs, const fs::path& out, const std::string& reference) {
  std::vector<SummaryRow> rows;
  std::vector<std::string> labels;
  std::vector<std::string> variants;
  for (const auto& dir : inputs) {
    const fs::path path = fs::is_directory(dir) ? dir / "reports" / "summary.json" : dir;
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string(), 0);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ": " + e.what(), 0);
    }
    for (const auto& fit : j) {
      for (const auto& r : fit["summary"]) {
        SummaryRow row;
        row.parameter = r["parameter"].get<std::string>();
        row.mean = r["mean"].get<double>();
        row.mc_error = r["mc_error"].get<double>();
        row.bias = opt_double(r["bias"]);
        row.mse = opt_double(r["mse"]);
        row.interval_lo = r["interval"][0].get<double>();
        row.interval_hi = r["interval"][1].get<double>();
        row.ess = r["ess"].get<double>();
        row.cpu_seconds = opt_double(r["cpu_seconds"]);
        rows.push_back(row);
        labels.push_back(fit["fit"].get<std::string>());
        variants.push_back(fit["variant"].get<std::string>());
      }
    }
  }
  const bool several = std::set<std::string>(variants.begin(), variants.end()).size() > 1;
  if (several) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (variants[r] == reference && rows[r].parameter == rows[i].parameter && rows[r].mse && rows[i].mse &&
            *rows[i].mse > 0.0) {
          rows[i].mse_ratio = r == i ? 1.0 : *rows[r].mse / *rows[i].mse;
        }
      }
    }
  }
  std::ostringstream os;
  write_summary_csv(os, rows, labels, "fit");
  if (out.empty()) {
    std::cout << os.str();
  } else {
    write_text_file(out, os.str());
    std::cerr << "wrote " << out.string() << '\n';
  }
  return kOk;
}

int run_experiment_cmd(const fs::path& spec_path, const fs::path& out, std::optional<std::uint64_t> seed,
                       std::optional<unsigned> threads) {
  std::ifstream in(spec_path);
  if (!in) throw ParseError("cannot open " + spec_path.string(), 0);
  std::stringstream buf;
  buf << in.rdbuf();
  ExperimentSpec spec = parse_experiment_spec(buf.str());
  if (seed) spec.seed = *seed;
  if (threads) spec.threads = *threads;
  return finish(run_experiment(spec, out), out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust error models for hierarchical and O-U state-space fits"};
  app.require_subcommand(1);

  std::string model_s = "hier";
  std::string variant = "nt";
  fs::path data_path;
  fs::path out = "out";
  ChainFlags flags;
  std::vector<std::string> gen;
  double z_threshold = 0.3;

  auto* fit = app.add_subcommand("fit", "Run an ensemble of chains on one data set");
  fit->add_option("--model", model_s, "toy, hier or ou")->check(CLI::IsMember({"toy", "hier", "ou"}))->capture_default_str();
  fit->add_option("--variant", variant, "gaussian, t, nn or nt")->check(CLI::IsMember({"gaussian", "t", "nn", "nt"}))->capture_default_str();
  fit->add_option("--data", data_path, "Input CSV")->required();
  fit->add_option("--out", out, "Output directory")->capture_default_str();
  fit->add_option("--gen", gen, "Generative value NAME=VALUE for bias/MSE (e.g. log_A=-0.3257)");
  fit->add_option("--outlier-threshold", z_threshold, "z-mean above which a point is flagged")->capture_default_str();
  flags.add_to(fit);

  std::string errors = "gaussian";
  std::vector<std::string> shifts;
  double beta = 0.0, A = 0.722;
  double mu = kMachoGenerative.mu, sigma2 = kMachoGenerative.sigma2, tau = kMachoGenerative.tau;
  std::vector<std::size_t> ou_outliers;
  std::size_t repeats = 10000;
  std::uint64_t sim_seed = 0;
  std::optional<fs::path> sim_template;
  auto* sim = app.add_subcommand("simulate", "Generate a data set with provenance");
  sim->add_option("--model", model_s, "hier or ou")->check(CLI::IsMember({"hier", "ou"}))->capture_default_str();
  sim->add_option("--data", sim_template, "Template CSV supplying V (hier) or t and sd (ou)");
  sim->add_option("--out", out, "Output directory")->capture_default_str();
  sim->add_option("--seed", sim_seed, "Master seed")->required();
  sim->add_option("--errors", errors, "gaussian or t4")->check(CLI::IsMember({"gaussian", "t4"}))->capture_default_str();
  sim->add_option("--shift", shifts, "hier outlier INDEX:MULTIPLIER (1-based, multiples of sd)");
  sim->add_option("--beta", beta)->capture_default_str();
  sim->add_option("--A", A)->capture_default_str();
  sim->add_option("--mu", mu)->capture_default_str();
  sim->add_option("--sigma2", sigma2)->capture_default_str();
  sim->add_option("--tau", tau)->capture_default_str();
  sim->add_option("--outliers", ou_outliers, "ou: 1-based indices copied from the template");
  sim->add_option("--repeats", repeats, "ou: candidates drawn, closest kept")->capture_default_str();

  std::vector<fs::path> inputs;
  std::size_t max_lag = 50;
  auto* diag = app.add_subcommand("diagnose", "ACF tables and ESS for chain CSVs");
  diag->add_option("--input", inputs, "Chain CSV files or bundle directories")->required();
  diag->add_option("--out", out, "Output directory")->capture_default_str();
  diag->add_option("--max-lag", max_lag)->capture_default_str();

  std::string reference = "nt";
  fs::path report_out;
  auto* rep = app.add_subcommand("report", "Join fit outputs into one comparison table");
  rep->add_option("--input", inputs, "Bundle directories or summary.json files")->required();
  rep->add_option("--reference", reference, "Variant whose MSE is the ratio numerator")->capture_default_str();
  rep->add_option("--out", report_out, "CSV path (stdout when omitted)");

  std::vector<double> k_fractions{1.0, 0.2};
  std::vector<double> ms{0.01, 0.05, 0.1};
  auto* sens = app.add_subcommand("sensitivity", "t and nt fits over a grid of Beta priors on theta");
  sens->add_option("--model", model_s, "hier or ou")->check(CLI::IsMember({"hier", "ou"}))->capture_default_str();
  sens->add_option("--data", data_path, "Input CSV")->required();
  sens->add_option("--out", out, "Output directory")->capture_default_str();
  sens->add_option("--k-fraction", k_fractions, "k as fractions of n")->capture_default_str();
  sens->add_option("--m-grid", ms, "prior means m")->capture_default_str();
  sens->add_option("--gen", gen, "Generative value NAME=VALUE");
  flags.add_to(sens);

  fs::path spec_path;
  std::optional<std::uint64_t> exp_seed;
  std::optional<unsigned> exp_threads;
  auto* exp = app.add_subcommand("experiment", "Run a protocol from a JSON spec");
  exp->add_option("--spec", spec_path, "Experiment JSON")->required();
  exp->add_option("--out", out, "Output directory")->capture_default_str();
  exp->add_option("--seed", exp_seed, "Overrides the spec's seed");
  exp->add_option("--threads", exp_threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*fit) return run_fit(parse_model(model_s), variant, data_path, out, flags, gen, z_threshold);
    if (*sim) {
      return run_simulate(parse_model(model_s), sim_template, out, sim_seed, errors, shifts, beta, A, mu, sigma2,
                          tau, ou_outliers, repeats);
    }
    if (*diag) return run_diagnose(inputs, out, max_lag, manifest_seconds(inputs));
    if (*rep) return run_report(inputs, report_out, reference);
    if (*sens) return run_sensitivity(parse_model(model_s), data_path, out, flags, k_fractions, ms, gen);
    if (*exp) return run_experiment_cmd(spec_path, out, exp_seed, exp_threads);
  } catch (const ChainDiverged& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}
