#include "yieldfusion/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "yieldfusion/dataset.hpp"
#include "yieldfusion/nuts.hpp"
#include "yieldfusion/posterior.hpp"
#include "yieldfusion/sarprep.hpp"
#include "yieldfusion/stats.hpp"
#include "yieldfusion/synth.hpp"
#include "yieldfusion/validation.hpp"

#ifndef YF_VERSION
#define YF_VERSION "0.0.0"
#endif
#ifndef YF_GIT_REVISION
#define YF_GIT_REVISION "unknown"
#endif

namespace yf {

namespace fs = std::filesystem;
using nlohmann::json;

nlohmann::json RunManifest::to_json() const {
  return {{"command", command}, {"config", config},        {"seed", seed},
          {"version", version}, {"wall_time_s", wall_time_s}, {"outputs", outputs}};
}

std::string version_string() { return std::string(YF_VERSION) + "+" + YF_GIT_REVISION; }

namespace {

constexpr const char* kBuiltinBeirut = "builtin:beirut";

// Usage or input problem; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FitOptions {
  int chains = 4;
  int iter = 8000;
  int warmup = 2000;
  double target_accept = 0.95;
  int max_depth = 12;
  double alpha = 1.0;
};

struct Common {
  std::string config_path;
  std::uint64_t seed = 1;
  int threads = 0;
  json config = json::object();  // file contents
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "JSON file of option defaults (explicit flags win)");
  sub->add_option("--seed", c.seed, "Master random seed");
  sub->add_option("--threads", c.threads, "Worker thread cap (0: automatic)")->check(CLI::NonNegativeNumber);
}

void add_fit_options(CLI::App* sub, FitOptions& f) {
  sub->add_option("--chains", f.chains, "Number of chains")->check(CLI::PositiveNumber);
  sub->add_option("--iter", f.iter, "Iterations per chain, warmup included")->check(CLI::PositiveNumber);
  sub->add_option("--warmup", f.warmup, "Warmup iterations per chain")->check(CLI::NonNegativeNumber);
  sub->add_option("--target-accept", f.target_accept, "Step size adaptation target");
  sub->add_option("--max-depth", f.max_depth, "Maximum tree depth")->check(CLI::PositiveNumber);
  sub->add_option("--alpha", f.alpha, "Dirichlet concentration of the trust weights")->check(CLI::PositiveNumber);
}

// Keys of the config file that are JSON objects rather than flag values.
bool is_structured_key(const std::string& k) { return k == "prior" || k == "scenario" || k == "link"; }

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number()) {
    std::ostringstream os;
    os << std::setprecision(17) << v.get<double>();
    return os.str();
  }
  throw UsageError("config value " + v.dump() + " is not a scalar");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("'" + path + "' is not valid JSON: " + e.what());
  }
}

// Fills options not given on the command line from the config file.
void merge_config(CLI::App* sub, Common& c) {
  if (c.config_path.empty()) return;
  c.config = read_json_file(c.config_path);
  if (!c.config.is_object()) throw UsageError("config file must hold a JSON object");
  for (const auto& [key, value] : c.config.items()) {
    if (is_structured_key(key)) {
      if (!value.is_object()) throw UsageError("config key '" + key + "' must be an object");
      continue;
    }
    CLI::Option* opt = sub->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") throw UsageError("unknown config key '" + key + "' for " + sub->get_name());
    if (opt->count() > 0) continue;
    if (value.is_array()) {
      for (const json& v : value) opt->add_result(scalar_text(v));
    } else {
      opt->add_result(scalar_text(value));
    }
    opt->run_callback();
  }
}

Dataset read_data(const std::string& path) {
  if (path == kBuiltinBeirut) return beirut_summary_dataset();
  if (!fs::exists(path)) throw UsageError("data file '" + path + "' does not exist");
  return load_dataset(path);
}

FitConfig make_fit_config(const FitOptions& f, const Common& c) {
  FitConfig cfg;
  cfg.nuts.n_chains = f.chains;
  cfg.nuts.n_iter = f.iter;
  cfg.nuts.n_warmup = f.warmup;
  cfg.nuts.target_accept = f.target_accept;
  cfg.nuts.max_tree_depth = f.max_depth;
  cfg.nuts.seed = c.seed;
  cfg.nuts.threads = c.threads;
  cfg.prior.dirichlet_alpha = f.alpha;
  if (c.config.contains("prior")) cfg.prior.apply_json(c.config["prior"]);
  if (c.config.contains("link")) {
    const json& l = c.config["link"];
    for (const auto& [k, v] : l.items()) {
      if (k == "alpha")
        cfg.link.alpha = v.get<double>();
      else if (k == "beta")
        cfg.link.beta = v.get<double>();
      else
        throw UsageError("unknown link key '" + k + "'");
    }
  }
  try {
    cfg.nuts.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

json fit_config_json(const FitConfig& cfg) {
  return {{"chains", cfg.nuts.n_chains},
          {"iter", cfg.nuts.n_iter},
          {"warmup", cfg.nuts.n_warmup},
          {"target_accept", cfg.nuts.target_accept},
          {"max_depth", cfg.nuts.max_tree_depth},
          {"seed", cfg.nuts.seed},
          {"prior", cfg.prior.to_json()},
          {"link", {{"alpha", cfg.link.alpha}, {"beta", cfg.link.beta}}}};
}

void ensure_parent(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_text(const std::string& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<double> split_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError("'" + tok + "' is not a number");
    }
  }
  return out;
}

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

FusionMethod method_or_usage(const std::string& name) {
  try {
    return parse_method(name);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

Modality modality_or_usage(const std::string& name) {
  try {
    return parse_modality(name);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

std::string preset_list() {
  std::string s;
  for (ScenarioPreset p : kAllPresets) s += std::string(s.empty() ? "" : ", ") + preset_name(p);
  return s;
}

ScenarioPreset preset_or_usage(const std::string& name) {
  try {
    return parse_preset(name);
  } catch (const std::exception&) {
    throw UsageError("unknown scenario '" + name + "' (valid: " + preset_list() + ")");
  }
}

// Method with fixed weights resolved: explicit list, else WAIC softmax over four single fits.
FusionMethod resolve_method(const std::string& name, const std::string& weights, const Dataset& data,
                            const FitConfig& cfg) {
  FusionMethod m = method_or_usage(name);
  if (!m.is_joint())
    throw UsageError("method '" + name + "' is not a joint density; use the fuse-posthoc subcommand");
  if (m.kind != FusionKind::FixedGamma) return m;
  if (!weights.empty()) {
    const std::vector<double> w = split_doubles(weights);
    if (w.size() != 4) throw UsageError("--weights needs four values (seismic, crater, sar, vlm)");
    try {
      return FusionMethod::fixed({w[0], w[1], w[2], w[3]});
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (data.n_modalities() != 4) throw UsageError("fixed method needs --weights unless all four modalities are present");
  return FusionMethod::fixed(fixed_gamma_weights(data, cfg));
}

json quantile_box(const std::vector<double>& x) {
  return {{"mean", mean_of(x)},
          {"sd", std::sqrt(variance_of(x))},
          {"q05", quantile_of(x, 0.05)},
          {"q25", quantile_of(x, 0.25)},
          {"q50", quantile_of(x, 0.50)},
          {"q75", quantile_of(x, 0.75)},
          {"q95", quantile_of(x, 0.95)}};
}

json density_curve(const std::vector<double>& x, int n = 256) {
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const double h = silverman_bandwidth(x);
  std::vector<double> grid(n);
  for (int i = 0; i < n; ++i) grid[i] = *lo - 3 * h + (*hi - *lo + 6 * h) * i / (n - 1);
  return {{"x", grid}, {"density", kde_on_grid(x, grid, h)}};
}

json diagnostics_json(const NutsResult& r, const PosteriorSummary& s, int max_depth) {
  json chains = json::array();
  for (const ChainOutput& c : r.chains) {
    int at_max = 0;
    for (int d : c.tree_depth) at_max += d >= max_depth;
    double e_mean = 0.0, num = 0.0, den = 0.0;
    for (double e : c.energy) e_mean += e / static_cast<double>(c.energy.size());
    for (std::size_t i = 0; i < c.energy.size(); ++i) {
      if (i > 0) num += (c.energy[i] - c.energy[i - 1]) * (c.energy[i] - c.energy[i - 1]);
      den += (c.energy[i] - e_mean) * (c.energy[i] - e_mean);
    }
    double acc = 0.0;
    for (double a : c.accept_stat) acc += a / static_cast<double>(c.accept_stat.size());
    chains.push_back({{"step_size", c.step_size.empty() ? 0.0 : c.step_size.back()},
                      {"mean_accept_stat", acc},
                      {"max_depth_hits", at_max},
                      {"e_bfmi", den > 0.0 ? num / den : 0.0}});
  }
  json params = json::object();
  for (const ParamSummary& p : s.params) params[p.name] = {{"rhat", p.rhat}, {"ess_bulk", p.ess_bulk}};
  return {{"n_divergent", r.n_divergent},         {"divergent_fraction", r.divergent_fraction},
          {"diagnostic_failure", r.diagnostic_failure}, {"mean_accept_stat", r.mean_accept_stat()},
          {"chains", chains},                     {"params", params}};
}

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}
  int run(const std::vector<std::string>& args);

 private:
  std::ostream& out_;
  std::ostream& err_;
  RunManifest manifest_;
  std::string manifest_path_;

  // Writes the manifest to --manifest or to the given default path.
  void finish(const std::string& default_path) {
    manifest_.version = version_string();
    const std::string path = manifest_path_.empty() ? default_path : manifest_path_;
    const auto t1 = std::chrono::steady_clock::now();
    manifest_.wall_time_s = std::chrono::duration<double>(t1 - start_).count();
    write_json(path, manifest_.to_json());
    out_ << "wrote " << path << "\n";
  }
  void output(const std::string& path) { manifest_.outputs.push_back(path); }

  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();

  int cmd_fit();
  int cmd_stress();
  int cmd_synth();
  int cmd_ppc();
  int cmd_loo();
  int cmd_sweep();
  int cmd_sarprep();
  int cmd_fuse();

  Common common_;
  FitOptions fit_;
  std::string data_ = kBuiltinBeirut;
  std::string method_ = "dirichlet";
  std::string weights_;
  std::string out_path_;
  std::string stress_out_ = "stress.csv";
  std::string ppc_out_ = "ppc.json";
  std::string loo_out_ = "loo.json";
  std::string sweep_out_ = "sweep_alpha.csv";
  std::string fuse_out_ = "fuse.json";
  std::string fuse_method_ = "bma";
  std::string out_dir_ = ".";
  std::string prefix_ = "fit";
  std::string scenario_ = "all";
  std::string methods_ = "single,fixed,bma,dirichlet";
  int replicates_ = 20;
  std::string mechanism_path_;
  std::string replicates_path_;
  std::string preset_ = "base_clean";
  std::string links_ = "inference";
  bool beirut_ = false;
  std::string modality_ = "all";
  int draws_ = 1000;
  std::string alphas_ = "0.1,0.5,1,2,5,10";
  std::vector<std::string> inputs_;
  std::string mode_ = "spatial";
  SpikeAdConfig spike_;
  ZonalConfig zonal_;
  bool composite_ = false;
  bool no_despeckle_ = false;
  std::string epicenter_ = "0,0";
  std::string cleaned_path_;
  long long n_total_ = 0;
};

int Runner::run(const std::vector<std::string>& args) {
  CLI::App app{"Bayesian multi-modality explosive yield fusion", "yieldfusion"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();

  auto add_manifest = [&](CLI::App* s) {
    s->add_option("--manifest", manifest_path_, "Run manifest path (default: <output>.manifest.json)");
  };

  CLI::App* fit = app.add_subcommand("fit", "Sample the joint posterior of one fusion method");
  add_common(fit, common_);
  add_fit_options(fit, fit_);
  fit->add_option("--data", data_, "Dataset JSON (builtin:beirut for the bundled summary data)");
  fit->add_option("--method", method_, "plain, single, fixed or dirichlet");
  fit->add_option("--weights", weights_, "Fixed trust weights: seismic,crater,sar,vlm");
  fit->add_option("--out-dir", out_dir_, "Output directory");
  fit->add_option("--prefix", prefix_, "Output file prefix");
  add_manifest(fit);

  FitOptions reduced;
  reduced.iter = 2000;
  reduced.warmup = 500;

  CLI::App* stress = app.add_subcommand("stress", "Fusion ablation over synthetic stress scenarios");
  add_common(stress, common_);
  add_fit_options(stress, reduced);
  stress->add_option("--scenario", scenario_, "Scenario name or all");
  stress->add_option("--methods", methods_, "Comma-separated methods");
  stress->add_option("--replicates", replicates_, "Replicates per scenario")->check(CLI::PositiveNumber);
  stress->add_option("-o,--output", stress_out_, "Performance CSV");
  stress->add_option("--mechanism", mechanism_path_, "Trust-weight mechanism CSV (default: <output stem>_mechanism.csv)");
  stress->add_option("--replicates-json", replicates_path_, "Per-replicate records as JSON");
  add_manifest(stress);

  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  add_common(synth, common_);
  synth->add_option("--preset", preset_, "Scenario preset");
  synth->add_option("--links", links_, "Generator links: inference or table");
  synth->add_flag("--beirut", beirut_, "Write the bundled Beirut summary dataset instead");
  synth->add_option("-o,--output", out_path_, "Dataset JSON")->required();
  add_manifest(synth);

  CLI::App* ppc = app.add_subcommand("ppc", "Posterior predictive checks");
  add_common(ppc, common_);
  add_fit_options(ppc, fit_);
  ppc->add_option("--data", data_, "Dataset JSON");
  ppc->add_option("--method", method_, "Joint fusion method");
  ppc->add_option("--weights", weights_, "Fixed trust weights");
  ppc->add_option("--modality", modality_, "seismic, crater, sar, vlm or all");
  ppc->add_option("--draws", draws_, "Posterior predictive replicates")->check(CLI::PositiveNumber);
  ppc->add_option("-o,--output", ppc_out_, "Result JSON");
  add_manifest(ppc);

  CLI::App* loo = app.add_subcommand("loo", "Leave-one-modality-out KL influence");
  add_common(loo, common_);
  add_fit_options(loo, fit_);
  loo->add_option("--data", data_, "Dataset JSON");
  loo->add_option("-o,--output", loo_out_, "Result JSON");
  add_manifest(loo);

  CLI::App* sweep = app.add_subcommand("sweep-alpha", "Sensitivity to the Dirichlet concentration");
  add_common(sweep, common_);
  add_fit_options(sweep, reduced);
  sweep->add_option("--data", data_, "Dataset JSON");
  sweep->add_option("--alphas", alphas_, "Comma-separated concentration values");
  sweep->add_option("-o,--output", sweep_out_, "Result CSV");
  add_manifest(sweep);

  CLI::App* sar = app.add_subcommand("sarprep", "Despeckle damage rasters and aggregate SAR boxes");
  add_common(sar, common_);
  sar->add_option("-i,--input", inputs_, "Raster text files")->required();
  sar->add_option("--mode", mode_, "Despeckling mode: spatial or temporal");
  sar->add_option("--window", spike_.window, "Spatial window size (odd)");
  sar->add_option("--mad-threshold", spike_.mad_threshold, "Replacement threshold in MAD units");
  sar->add_option("--iterations", spike_.iterations, "Despeckling passes");
  sar->add_flag("--no-despeckle", no_despeckle_, "Skip despeckling");
  sar->add_flag("--composite", composite_, "Combine several rasters into a scaled pixel-wise mean");
  sar->add_option("--epicenter", epicenter_, "Epicentre x,y in raster coordinates");
  sar->add_option("--box", zonal_.box, "Box size in pixels");
  sar->add_option("--annuli", zonal_.n_annuli, "Number of annuli");
  sar->add_option("--r-inner", zonal_.r_inner_m, "Inner radius (m)");
  sar->add_option("--r-outer", zonal_.r_outer_m, "Outer radius (m)");
  sar->add_option("--percentile", zonal_.percentile, "Per-annulus retention percentile");
  sar->add_option("--cleaned", cleaned_path_, "Write the despeckled damage raster");
  sar->add_option("-o,--output", out_path_, "Dataset JSON holding the SAR boxes")->required();
  add_manifest(sar);

  CLI::App* fuse = app.add_subcommand("fuse-posthoc", "BMA or covariance intersection over single-modality fits");
  add_common(fuse, common_);
  add_fit_options(fuse, fit_);
  fuse->add_option("--data", data_, "Dataset JSON");
  fuse->add_option("--method", fuse_method_, "bma or ci");
  fuse->add_option("--draws", n_total_, "BMA draw count (default: chains x post-warmup)");
  fuse->add_option("-o,--output", fuse_out_, "Result JSON");
  add_manifest(fuse);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out_ << app.help(app.get_subcommands().empty() ? "" : app.get_subcommands()[0]->get_name());
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out_ << version_string() << "\n";
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out_ << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  CLI::App* sub = app.get_subcommands().front();
  merge_config(sub, common_);
  manifest_.command = sub->get_name();
  manifest_.seed = common_.seed;
  json cfg = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames().front();
    if (name == "help") continue;
    const auto res = opt->results();
    if (!res.empty())
      cfg[name] = res.size() == 1 ? json(res.front()) : json(res);
    else if (!opt->get_default_str().empty())
      cfg[name] = opt->get_default_str();
  }
  for (const char* k : {"prior", "scenario", "link"})
    if (common_.config.contains(k)) cfg[k] = common_.config[k];
  manifest_.config = cfg;

  if (sub == fit) return cmd_fit();
  if (sub == stress) {
    fit_ = reduced;
    out_path_ = stress_out_;
    return cmd_stress();
  }
  if (sub == synth) return cmd_synth();
  if (sub == ppc) {
    out_path_ = ppc_out_;
    return cmd_ppc();
  }
  if (sub == loo) {
    out_path_ = loo_out_;
    return cmd_loo();
  }
  if (sub == sweep) {
    fit_ = reduced;
    out_path_ = sweep_out_;
    return cmd_sweep();
  }
  if (sub == sar) return cmd_sarprep();
  out_path_ = fuse_out_;
  method_ = fuse_method_;
  return cmd_fuse();
}

int Runner::cmd_fit() {
  const FusionMethod parsed = method_or_usage(method_);
  if (!parsed.is_joint())
    throw UsageError("method '" + method_ + "' has no joint density; run the fuse-posthoc subcommand instead");
  const Dataset data = read_data(data_);
  const FitConfig cfg = make_fit_config(fit_, common_);
  const FusionMethod method = resolve_method(method_, weights_, data, cfg);
  const JointDensity density(data, method, cfg.prior, cfg.link);
  const NutsResult r = run_nuts(density, cfg.nuts);
  const PosteriorSummary s = summarize(r);

  const fs::path dir(out_dir_);
  fs::create_directories(dir);
  const auto path = [&](const std::string& suffix) { return (dir / (prefix_ + suffix)).string(); };

  const std::string draws_path = path("_draws.csv");
  write_draws_csv(r, draws_path);
  output(draws_path);

  json summary = to_json(s);
  summary["method"] = method.name();
  summary["weights"] = method.kind == FusionKind::FixedGamma ? json(method.weights) : json(nullptr);
  summary["modalities"] = json::array();
  for (Modality m : density.modalities()) summary["modalities"].push_back(modality_name(m));
  summary["yield_kt"] = summary["params"]["yield_kt"];
  summary["fit"] = fit_config_json(cfg);
  const std::string summary_path = path("_summary.json");
  write_json(summary_path, summary);
  output(summary_path);

  json weights = json::object();
  for (std::size_t j = 0; j < r.names.size(); ++j)
    if (r.names[j].rfind("gamma_", 0) == 0 || r.names[j] == "beta")
      weights[r.names[j]] = quantile_box(r.pooled(static_cast<int>(j)));
  const std::string weights_path = path("_weights.json");
  write_json(weights_path, weights);
  output(weights_path);

  const std::string diag_path = path("_diagnostics.json");
  write_json(diag_path, diagnostics_json(r, s, cfg.nuts.max_tree_depth));
  output(diag_path);

  const std::string density_path = path("_yield_density.json");
  write_json(density_path, density_curve(r.pooled(r.column("yield_kt"))));
  output(density_path);

  const ParamSummary& y = s.get("yield_kt");
  out_ << std::setprecision(4) << "yield_kt mode " << y.mode << " median " << y.median << " mean " << y.mean
       << " hdi95 [" << y.hdi_lo << ", " << y.hdi_hi << "]\n";
  finish(path("_manifest.json"));
  if (r.diagnostic_failure) {
    err_ << json{{"error", "diagnostics"},
                 {"exit_code", kExitDiagnostics},
                 {"message", "divergent fraction " + std::to_string(r.divergent_fraction) + " exceeds 0.25"}}
                .dump()
         << "\n";
    return kExitDiagnostics;
  }
  return kExitOk;
}

int Runner::cmd_stress() {
  std::vector<ScenarioPreset> presets;
  if (scenario_ == "all")
    presets.assign(std::begin(kAllPresets), std::end(kAllPresets));
  else
    for (const std::string& n : split_names(scenario_)) presets.push_back(preset_or_usage(n));
  std::vector<FusionMethod> methods;
  for (const std::string& n : split_names(methods_)) methods.push_back(method_or_usage(n));
  if (methods.empty()) throw UsageError("--methods is empty");

  AblationConfig acfg;
  acfg.fit = make_fit_config(fit_, common_);
  acfg.fit.nuts.threads = 1;
  acfg.n_replicates = replicates_;
  acfg.seed = common_.seed;
  acfg.threads = common_.threads > 0 ? common_.threads : 1;

  std::vector<AblationRow> rows;
  for (ScenarioPreset p : presets) {
    ScenarioConfig sc = preset(p);
    if (common_.config.contains("scenario")) sc.apply_json(common_.config["scenario"]);
    const auto part = run_ablation(sc, preset_name(p), corrupted_modality(p), methods, acfg);
    rows.insert(rows.end(), part.begin(), part.end());
  }

  write_text(out_path_, ablation_csv(rows));
  output(out_path_);

  std::string mech = mechanism_path_;
  if (mech.empty()) {
    fs::path p(out_path_);
    mech = (p.parent_path() / (p.stem().string() + "_mechanism.csv")).string();
  }
  std::ostringstream os;
  os << std::setprecision(10)
     << "scenario,corrupted_modality,gamma_seismic,gamma_crater,gamma_sar,gamma_vlm,gamma_corrupted\n";
  for (const AblationRow& row : rows) {
    if (row.method != "dirichlet") continue;
    int corrupted = -1;
    for (ScenarioPreset p : presets)
      if (row.scenario == preset_name(p)) corrupted = corrupted_modality(p);
    os << row.scenario << ',' << (corrupted >= 0 ? modality_name(static_cast<Modality>(corrupted)) : "none");
    for (double g : row.median_gamma) os << ',' << g;
    os << ',';
    if (corrupted >= 0) os << row.median_gamma_corrupted;
    os << '\n';
  }
  write_text(mech, os.str());
  output(mech);

  if (!replicates_path_.empty()) {
    json j = json::array();
    for (const AblationRow& row : rows) j.push_back(to_json(row));
    write_json(replicates_path_, j);
    output(replicates_path_);
  }
  for (const AblationRow& row : rows)
    out_ << row.scenario << ' ' << row.method << " coverage " << row.coverage << " width " << row.median_width
         << " rmse " << row.median_rmse << "\n";
  finish(out_path_ + ".manifest.json");
  return kExitOk;
}

int Runner::cmd_synth() {
  Dataset d;
  if (beirut_) {
    d = beirut_summary_dataset();
  } else {
    ScenarioConfig sc = preset(preset_or_usage(preset_));
    if (links_ == "table")
      sc.use_table_links();
    else if (links_ != "inference")
      throw UsageError("--links must be inference or table");
    if (common_.config.contains("scenario")) sc.apply_json(common_.config["scenario"]);
    sc.seed = common_.seed;
    try {
      sc.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    d = generate(sc);
    d.meta["preset"] = preset_;
  }
  ensure_parent(out_path_);
  save_dataset(d, out_path_);
  output(out_path_);
  out_ << "dataset with " << d.n_sar() << " SAR boxes and " << d.n_vlm() << " VLM records\n";
  finish(out_path_ + ".manifest.json");
  return kExitOk;
}

int Runner::cmd_ppc() {
  const Dataset data = read_data(data_);
  std::vector<Modality> mods;
  if (modality_ == "all") {
    for (Modality m : kAllModalities)
      if (data.has(m)) mods.push_back(m);
  } else {
    mods.push_back(modality_or_usage(modality_));
    if (!data.has(mods[0])) throw UsageError(std::string("dataset has no ") + modality_name(mods[0]) + " data");
  }
  const FitConfig cfg = make_fit_config(fit_, common_);
  const FusionMethod method = resolve_method(method_, weights_, data, cfg);
  const JointDensity density(data, method, cfg.prior, cfg.link);
  const NutsResult r = run_nuts(density, cfg.nuts);
  json results = json::array();
  for (Modality m : mods) {
    const PpcResult p = ppc(r, density, m, draws_, chain_seed(common_.seed, 31 + static_cast<int>(m)));
    results.push_back(to_json(p));
    out_ << modality_name(m) << " p_bayes " << p.p_bayes << " mid_p " << p.mid_p << " se " << p.se << "\n";
  }
  const json j = mods.size() == 1 && modality_ != "all"
                     ? results[0]
                     : json{{"method", method.name()}, {"results", results}, {"diagnostic_failure", r.diagnostic_failure}};
  write_json(out_path_, j);
  output(out_path_);
  finish(out_path_ + ".manifest.json");
  return r.diagnostic_failure ? kExitDiagnostics : kExitOk;
}

int Runner::cmd_loo() {
  const Dataset data = read_data(data_);
  if (data.n_modalities() < 2) throw UsageError("leave-one-out needs at least two modalities");
  const FitConfig cfg = make_fit_config(fit_, common_);
  const LooKlResult r = loo_kl(data, cfg);
  write_json(out_path_, to_json(r));
  output(out_path_);
  for (std::size_t i = 0; i < r.modalities.size(); ++i)
    out_ << modality_name(r.modalities[i]) << " kl " << r.kl[i] << " gamma " << r.gamma_mean[i] << "\n";
  out_ << "spearman " << r.spearman << "\n";
  finish(out_path_ + ".manifest.json");
  return kExitOk;
}

int Runner::cmd_sweep() {
  const Dataset data = read_data(data_);
  const std::vector<double> alphas = split_doubles(alphas_);
  if (alphas.empty()) throw UsageError("--alphas is empty");
  for (double a : alphas)
    if (!(a > 0.0)) throw UsageError("concentration values must be positive");
  const FitConfig cfg = make_fit_config(fit_, common_);
  const AlphaSweepResult r = alpha_sweep(data, alphas, cfg);
  std::ostringstream os;
  os << std::setprecision(10) << "alpha,median_yield_kt,hdi_lo_kt,hdi_hi_kt";
  for (Modality m : r.modalities) os << ",gamma_" << modality_name(m);
  os << ",gamma_dispersion,kl_vs_alpha1\n";
  for (const AlphaRow& row : r.rows) {
    os << row.alpha << ',' << row.median_yield << ',' << row.hdi_lo << ',' << row.hdi_hi;
    for (double g : row.gamma_mean) os << ',' << g;
    os << ',' << row.dispersion() << ',' << row.kl_vs_baseline << '\n';
  }
  write_text(out_path_, os.str());
  output(out_path_);
  out_ << "relative_range " << r.relative_range() << " dispersion_monotone " << r.dispersion_monotone()
       << " ranking_stable " << r.ranking_stable() << "\n";
  finish(out_path_ + ".manifest.json");
  return kExitOk;
}

int Runner::cmd_sarprep() {
  if (mode_ == "spatial")
    spike_.mode = SpikeMode::Spatial;
  else if (mode_ == "temporal")
    spike_.mode = SpikeMode::Temporal;
  else
    throw UsageError("--mode must be spatial or temporal");
  const std::vector<double> epi = split_doubles(epicenter_);
  if (epi.size() != 2) throw UsageError("--epicenter needs x,y");
  zonal_.epicenter_x = epi[0];
  zonal_.epicenter_y = epi[1];
  try {
    spike_.validate();
    zonal_.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  std::vector<Raster> stack;
  for (const std::string& p : inputs_) {
    if (!fs::exists(p)) throw UsageError("raster file '" + p + "' does not exist");
    stack.push_back(load_raster(p));
  }
  if (stack.size() > 1 && !composite_) throw UsageError("several rasters need --composite");
  try {
    if (!no_despeckle_) stack = spikead(stack, spike_);
    const Raster damage = stack.size() > 1 ? composite(stack) : stack[0];
    const ZonalResult z = zonal_aggregate(damage, zonal_);
    if (z.boxes.empty()) throw UsageError("no boxes fall inside the annuli");
    Dataset d;
    d.sar = z.boxes;
    d.meta["sarprep"] = {{"inputs", inputs_},
                         {"empty_annuli", z.empty_annuli},
                         {"boxes_per_annulus", z.boxes_per_annulus},
                         {"despeckled", !no_despeckle_}};
    validate_dataset(d);
    if (!cleaned_path_.empty()) {
      ensure_parent(cleaned_path_);
      save_raster(damage, cleaned_path_);
      output(cleaned_path_);
    }
    ensure_parent(out_path_);
    save_dataset(d, out_path_);
    output(out_path_);
    out_ << z.boxes.size() << " boxes retained, " << z.empty_annuli << " empty annuli\n";
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  finish(out_path_ + ".manifest.json");
  return kExitOk;
}

int Runner::cmd_fuse() {
  const FusionMethod method = method_or_usage(method_);
  if (method.is_joint()) throw UsageError("fuse-posthoc handles bma and ci; use fit for joint methods");
  const Dataset data = read_data(data_);
  const FitConfig cfg = make_fit_config(fit_, common_);
  const std::vector<SingleModalityFit> fits = fit_all_single(data, cfg);
  bool failed = false;
  json singles = json::array();
  for (const SingleModalityFit& f : fits) {
    failed = failed || f.diagnostic_failure;
    singles.push_back({{"modality", modality_name(f.modality)},
                       {"lppd", f.lppd},
                       {"p_waic", f.p_waic},
                       {"elpd", f.elpd()},
                       {"waic", f.waic()},
                       {"yield_median_kt", median_of(f.yield_draws)},
                       {"diagnostic_failure", f.diagnostic_failure}});
  }
  json j{{"method", method.name()}, {"single_fits", singles}};
  if (method.kind == FusionKind::BMA) {
    const std::size_t n = n_total_ > 0 ? static_cast<std::size_t>(n_total_)
                                       : static_cast<std::size_t>(cfg.nuts.n_chains) *
                                             static_cast<std::size_t>(cfg.nuts.n_iter - cfg.nuts.n_warmup);
    const std::vector<double> draws = bma_fuse(fits, n);
    const auto [lo, hi] = hdi(draws);
    j["yield_kt"] = {{"mean", mean_of(draws)},
                     {"median", median_of(draws)},
                     {"mode", kde_mode(draws)},
                     {"hdi_95", {lo, hi}},
                     {"n_draws", draws.size()}};
    j["yield_density"] = density_curve(draws);
  } else {
    const CiResult c = ci_fuse(fits);
    const double sd = std::sqrt(c.var);
    const double z = 1.959963984540054;
    j["yield_kt"] = {{"mean", c.mean}, {"sd", sd}, {"hdi_95", {c.mean - z * sd, c.mean + z * sd}}};
    j["omega"] = json::object();
    for (Modality m : kAllModalities) j["omega"][modality_name(m)] = c.omega[static_cast<int>(m)];
  }
  j["diagnostic_failure"] = failed;
  write_json(out_path_, j);
  output(out_path_);
  out_ << j["yield_kt"].dump() << "\n";
  finish(out_path_ + ".manifest.json");
  return failed ? kExitDiagnostics : kExitOk;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

void report(std::ostream& err, int code, const std::string& kind, const std::string& msg) {
  err << json{{"error", kind}, {"exit_code", code}, {"message", one_line(msg)}}.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    Runner r(out, err);
    return r.run(args);
  } catch (const UsageError& e) {
    report(err, kExitUsage, "usage", e.what());
  } catch (const SchemaError& e) {
    report(err, kExitUsage, "schema", e.what());
  } catch (const UnsupportedMethod& e) {
    report(err, kExitUsage, "usage", e.what());
  } catch (const RangeError& e) {
    report(err, kExitUsage, "range", e.what());
  } catch (const std::invalid_argument& e) {
    report(err, kExitUsage, "invalid_argument", e.what());
  } catch (const json::exception& e) {
    report(err, kExitUsage, "json", e.what());
  } catch (const std::exception& e) {
    report(err, kExitUsage, "runtime", e.what());
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace yf
