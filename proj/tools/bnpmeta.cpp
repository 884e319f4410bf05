// bnpmeta: command-line front end.
//
// Exit codes: 0 ok, 2 bad input, 3 sampler abort, 4 artifact mismatch.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bnpmeta/bnpmeta.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bnpmeta;

namespace {

enum ExitCode { kOk = 0, kInputError = 2, kSamplerError = 3, kMismatch = 4 };

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

fs::path default_out_dir() {
  if (const char* env = std::getenv("BNPMETA_OUTDIR"); env && *env) return env;
  return ".";
}

// Collects written artifacts and their digests for the run manifest.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw InputError("cannot create output directory " + dir_.string());
  }

  const fs::path& dir() const { return dir_; }
  fs::path path(const std::string& name) const { return dir_ / name; }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(path(name), std::ios::binary);
    if (!out) throw InputError("cannot write " + path(name).string());
    out << content;
    if (!out) throw InputError("write failed for " + path(name).string());
    digests_[name] = sha256_hex(content);
  }

  void record(const fs::path& file) { digests_[file.filename().string()] = sha256_file(file); }

  // Writes manifest-<command>.json. If a manifest for the same command,
  // inputs and config already exists, its output digests must agree.
  void finish(const std::string& command, const json& inputs, const json& config) {
    json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["inputs"] = inputs;
    m["config"] = config;
    m["outputs"] = digests_;
    const auto file = path("manifest-" + command + ".json");
    if (std::ifstream old(file); old) {
      json prev;
      try {
        prev = json::parse(old);
      } catch (const json::exception&) {
        prev = nullptr;
      }
      if (prev.is_object() && prev.value("inputs", json()) == inputs && prev.value("config", json()) == config &&
          prev.value("version", "") == kVersion) {
        const auto outputs = prev.value("outputs", json::object());
        for (const auto& [name, digest] : digests_)
          if (outputs.contains(name) && outputs[name] != digest)
            throw ArtifactMismatch("rerun of '" + command + "' produced a different " + name +
                                   " than recorded in " + file.string());
      }
    }
    std::ofstream out(file, std::ios::binary);
    out << m.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  std::map<std::string, std::string> digests_;
};

json input_digest(const fs::path& p) { return {{"file", p.filename().string()}, {"sha256", sha256_file(p)}}; }

const std::vector<std::string> kMcmcKeys{"iterations", "burn_in",       "thin",           "seed",
                                         "batch_count", "chains",       "tail_mass_tol",  "max_window_cells",
                                         "window_min",  "window_max"};
const std::vector<std::string> kPriorKeys{"beta0_var",        "slope_var",      "phi_shape",
                                          "phi_rate",         "sigma_mu2_upper", "beta_omega_var",
                                          "sigma_omega_prec_shape", "sigma_omega_prec_rate", "mu_prior",
                                          "mu_fixed_var",     "sigma_omega_prior"};

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

// Key-value settings: flags override the config file, which overrides defaults.
struct Settings {
  std::string config_path;
  KeyValues flags;

  void add_options(CLI::App* app, const std::vector<std::string>& keys, const std::string& group) {
    for (const auto& key : keys)
      app->add_option_function<std::string>(
             flag_name(key), [this, key](const std::string& v) { flags[key] = v; }, "Override '" + key + "'")
          ->group(group);
  }

  KeyValues resolve(const std::vector<std::string>& allowed) const {
    KeyValues kv;
    if (!config_path.empty()) kv = read_key_values(config_path);
    for (const auto& [k, v] : kv)
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
        throw InputError("unknown key '" + k + "' in " + config_path);
    for (const auto& [k, v] : flags) kv[k] = v;
    return kv;
  }
};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

json to_json(const ChainSummary& s, bool with_trace) {
  json params = json::array();
  for (const auto& p : s.parameters) {
    json j{{"name", p.name}, {"mean", p.mean}, {"sd", p.sd}, {"q025", p.q025}, {"q975", p.q975},
           {"mc_half_width", p.mc_half_width}, {"rhat", p.rhat}};
    if (with_trace) j["trace"] = p.trace;
    params.push_back(j);
  }
  return {{"draws", s.draws}, {"chains", s.chains}, {"parameters", params}};
}

json to_json(const Interval& i) {
  return {{"mean", i.mean}, {"lower", i.lower}, {"upper", i.upper}, {"significant", i.significant}};
}

json to_json(const std::vector<CoefficientRow>& rows) {
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"name", r.name}, {"standardized", to_json(r.standardized)}, {"original", to_json(r.original)}});
  return out;
}

std::string diagnostics_text(const Chain& chain, const ChainSummary& s) {
  std::ostringstream out;
  out << "draws " << s.draws << " chains " << s.chains << '\n';
  for (std::size_t k = 0; k < chain.windows.size(); ++k)
    out << "chain " << k << " window [" << chain.windows[k].j_min << ", " << chain.windows[k].j_max << "] changes "
        << chain.windows[k].changes << '\n';
  double worst = 0.0;
  std::string worst_name;
  for (const auto& p : s.parameters)
    if (std::isfinite(p.mc_half_width) && p.mc_half_width > worst) {
      worst = p.mc_half_width;
      worst_name = p.name;
    }
  out << "largest batch-means half-width " << csv::format_double(worst) << " (" << worst_name << ")\n";
  out << "parameter,mean,sd,q025,q975,mc_half_width,rhat\n";
  for (const auto& p : s.parameters)
    out << p.name << ',' << csv::format_double(p.mean) << ',' << csv::format_double(p.sd) << ','
        << csv::format_double(p.q025) << ',' << csv::format_double(p.q975) << ','
        << csv::format_double(p.mc_half_width) << ',' << csv::format_double(p.rhat) << '\n';
  return out.str();
}

std::string to_csv(const std::vector<CoefficientRow>& rows) {
  std::ostringstream out;
  write_coefficient_csv(out, rows);
  return out.str();
}

struct LoadedFit {
  FittedChain fit;
  Standardization standardization;
  std::optional<StandardizedDataset> data;
  json inputs = json::object();
};

// Loads a chain and the standardization to report under; with a dataset the
// two must agree.
LoadedFit load_fit(const std::string& chain_path, const std::string& data_path) {
  LoadedFit out;
  out.fit = load_chain(chain_path);
  const auto files = chain_files(chain_path);
  out.inputs["chain"] = input_digest(files.csv);
  out.inputs["chain_sidecar"] = input_digest(files.sidecar);
  if (!data_path.empty()) {
    const auto schema = ModeratorSchema::canonical();
    const auto records = load_dataset(data_path, schema);
    out.data = standardize(records, schema, nullptr);
    out.inputs["data"] = input_digest(data_path);
    if (out.fit.standardization && !out.fit.standardization->matches(out.data->standardization))
      throw ArtifactMismatch("dataset standardization does not match the one recorded with the chain");
    out.standardization = out.data->standardization;
  } else if (out.fit.standardization) {
    out.standardization = *out.fit.standardization;
  } else {
    throw InputError("chain carries no standardization; pass --data");
  }
  if (out.fit.chain.empty()) throw InputError("chain has no draws");
  if (out.fit.chain.coefficients != static_cast<Eigen::Index>(out.standardization.size()) + 1)
    throw ArtifactMismatch("chain and dataset disagree on the number of moderators");
  return out;
}

struct GridOptions {
  double var_condition = 0.001;
  GridSpec grid;

  void add(CLI::App* app) {
    app->add_option("--var-condition", var_condition, "Sampling variance to condition on")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app->add_option("--grid-min", grid.y_min, "Lower end of the density grid")->capture_default_str();
    app->add_option("--grid-max", grid.y_max, "Upper end of the density grid")->capture_default_str();
    app->add_option("--grid-points", grid.points, "Number of grid points")->capture_default_str();
  }

  json to_json() const {
    return {{"var_condition", var_condition}, {"grid_min", grid.y_min}, {"grid_max", grid.y_max},
            {"grid_points", grid.points}};
  }
};

// ---- compute-es -------------------------------------------------------------

struct ComputeEsArgs {
  std::string input;
  std::string output = "effect_sizes.csv";
  bool pool = false;
  std::string out_dir;
};

int cmd_compute_es(const ComputeEsArgs& a) {
  std::ifstream in(a.input);
  if (!in) throw InputError("cannot open " + a.input);
  const auto rows = parse_correlations(in);
  const auto effects = compute_effect_sizes(rows, a.pool);
  std::ostringstream out;
  write_effect_sizes(out, effects);
  OutputSet outputs(a.out_dir.empty() ? default_out_dir() : fs::path(a.out_dir));
  outputs.write(a.output, out.str());
  outputs.finish("compute-es", {{"correlations", input_digest(a.input)}}, {{"pool", a.pool}});
  std::cout << "wrote " << effects.size() << " rows to " << outputs.path(a.output).string() << '\n';
  return kOk;
}

// ---- fit --------------------------------------------------------------------

struct FitArgs {
  std::string data;
  std::string name = "chain";
  std::string out_dir;
  Settings settings;
};

int cmd_fit(FitArgs& a) {
  const auto kv = a.settings.resolve(concat(kMcmcKeys, kPriorKeys));
  const auto prior = apply_prior_keys(kv);
  const auto cfg = apply_mcmc_keys(kv);
  const auto schema = ModeratorSchema::canonical();
  const auto records = load_dataset(a.data, schema);
  const auto data = standardize(records, schema, &std::cerr);
  OutputSet outputs(a.out_dir.empty() ? default_out_dir() : fs::path(a.out_dir));

  std::cerr << "fitting " << records.size() << " records, " << cfg.iterations << " iterations x " << cfg.chains
            << " chain(s)\n";
  Chain chain;
  try {
    chain = run_chain(data, prior, cfg);
  } catch (const SamplerError& e) {
    const auto dump = outputs.path("sampler_dump.json");
    std::ofstream(dump) << e.state_dump() << '\n';
    std::cerr << "error: sampler aborted: " << e.what() << "\nstate dump: " << dump.string() << '\n';
    return kSamplerError;
  }

  const auto files = save_chain(outputs.path(a.name), {chain, data.standardization});
  outputs.record(files.csv);
  outputs.record(files.sidecar);
  const auto summary = summarize_chain(chain, cfg.batch_count);
  const auto table = coefficient_table(chain, data.standardization);
  json s = to_json(summary, true);
  s["coefficients"] = to_json(table);
  s["windows"] = json::array();
  for (const auto& w : chain.windows) s["windows"].push_back({{"j_min", w.j_min}, {"j_max", w.j_max}, {"changes", w.changes}});
  outputs.write("summary.json", s.dump(2) + "\n");
  outputs.write("coefficients.csv", to_csv(table));
  outputs.write("diagnostics.txt", diagnostics_text(chain, summary));
  json config{{"mcmc", bnpmeta::to_json(cfg)}, {"prior", bnpmeta::to_json(prior)}, {"name", a.name}};
  outputs.finish("fit", {{"data", input_digest(a.data)}}, config);
  std::cout << "wrote " << chain.size() << " draws to " << files.csv.string() << '\n';
  return kOk;
}

// ---- predict ----------------------------------------------------------------

struct PredictArgs {
  std::string chain;
  std::string data;
  std::vector<std::string> x;
  GridOptions grid;
  std::string out_dir;
};

int cmd_predict(const PredictArgs& a) {
  const auto loaded = load_fit(a.chain, a.data);
  const auto& st = loaded.standardization;
  const auto& chain = loaded.fit.chain;
  PredictiveQuery q = PredictiveQuery::baseline(st.size());
  q.var_condition = a.grid.var_condition;
  q.grid = a.grid.grid;
  json query = json::object();
  for (const auto& item : a.x) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw InputError("--x expects name=value, got '" + item + "'");
    const auto name = csv::trim(item.substr(0, eq));
    const auto k = st.index_of(name);
    if (!k) throw InputError("unknown moderator '" + name + "'");
    const auto v = csv::parse_double(csv::trim(item.substr(eq + 1)));
    if (!v || !std::isfinite(*v)) throw InputError("non-numeric value for moderator '" + name + "'");
    q.moderators[*k] = *v;
    query[name] = *v;
  }
  q.grid.validate();
  const auto d = predictive_density(chain, q, st);
  for (const auto& w : d.warnings) std::cerr << "warning: " << w << '\n';

  OutputSet outputs(a.out_dir.empty() ? default_out_dir() : fs::path(a.out_dir));
  std::ostringstream density;
  csv::write_row(density, {"y", "density"});
  for (std::size_t k = 0; k < d.grid.size(); ++k)
    csv::write_row(density, {csv::format_double(d.grid[k]), csv::format_double(d.density[k])});
  outputs.write("density.csv", density.str());
  json summary{{"mean", d.mean},       {"median", d.median},     {"variance", d.variance},
               {"skewness", d.skewness}, {"kurtosis", d.kurtosis}, {"modes", d.modes},
               {"q25", d.q25},         {"q50", d.q50},           {"q75", d.q75},
               {"mass_in_grid", d.mass_in_grid}, {"grid_extended", d.grid_extended}, {"warnings", d.warnings},
               {"query", query}};
  outputs.write("density.json", summary.dump(2) + "\n");

  const auto table = coefficient_table(chain, st);
  outputs.write("coefficients.csv", to_csv(table));
  if (st.index_of("SE")) {
    const auto bias = publication_bias_report(chain, st, q.var_condition, q.grid);
    json curve = json::array();
    for (const auto& p : bias.curve) curve.push_back({{"se", p.se}, {"median", p.median}, {"q25", p.q25}, {"q75", p.q75}});
    json b{{"slope_standardized", to_json(bias.slope_standardized)},
           {"slope_original", to_json(bias.slope_original)},
           {"prob_positive", bias.prob_positive},
           {"median_movement", bias.median_movement},
           {"pooled_iqr", bias.pooled_iqr},
           {"bias_indicated", bias.bias_indicated},
           {"verdict", bias.verdict},
           {"curve", curve}};
    outputs.write("publication_bias.json", b.dump(2) + "\n");
  }
  json config = a.grid.to_json();
  config["x"] = query;
  outputs.finish("predict", loaded.inputs, config);
  std::cout << "mean " << d.mean << " median " << d.median << " modes " << d.modes.size() << '\n';
  return kOk;
}

// ---- profile ----------------------------------------------------------------

struct ProfileArgs {
  std::string chain;
  std::string data;
  std::vector<double> ages;
  std::vector<std::string> informants = informant_moderators();
  GridOptions grid;
  std::string out_dir;
};

int cmd_profile(const ProfileArgs& a) {
  const auto loaded = load_fit(a.chain, a.data);
  std::vector<ProfilePoint> rows;
  for (const auto& inf : a.informants) {
    const auto curve = profile_curve(loaded.fit.chain, inf, a.ages, loaded.standardization, a.grid.var_condition,
                                     a.grid.grid, &std::cerr);
    rows.insert(rows.end(), curve.begin(), curve.end());
  }
  OutputSet outputs(a.out_dir.empty() ? default_out_dir() : fs::path(a.out_dir));
  std::ostringstream out;
  write_profile_csv(out, rows);
  outputs.write("profile.csv", out.str());
  json config = a.grid.to_json();
  config["ages"] = a.ages;
  config["informants"] = a.informants;
  outputs.finish("profile", loaded.inputs, config);
  std::cout << "wrote " << rows.size() << " rows to " << outputs.path("profile.csv").string() << '\n';
  return kOk;
}

// ---- fit-score --------------------------------------------------------------

struct FitScoreArgs {
  std::string chain;
  std::string data;
  std::string out_dir;
};

int cmd_fit_score(const FitScoreArgs& a) {
  const auto loaded = load_fit(a.chain, a.data);
  const auto score = fit_score(loaded.fit.chain, loaded.data->design());
  std::vector<std::string> ids;
  for (const auto& r : loaded.data->records) ids.push_back(r.study_id);
  const auto& f = score.root_summary;
  json j{{"total", score.total},
         {"per_obs", score.per_obs},
         {"per_obs_root", score.per_obs_root},
         {"study_id", ids},
         {"root_summary", {{"min", f.min}, {"q25", f.q25}, {"median", f.median}, {"q75", f.q75}, {"max", f.max}}}};
  OutputSet outputs(a.out_dir.empty() ? default_out_dir() : fs::path(a.out_dir));
  outputs.write("fit_score.json", j.dump(2) + "\n");
  outputs.finish("fit-score", loaded.inputs, json::object());
  std::cout << "D(m) = " << score.total << '\n';
  return kOk;
}

// ---- diagnose ---------------------------------------------------------------

struct DiagnoseArgs {
  std::string chain;
  int batch_count = 0;
  std::string out_dir;
};

int cmd_diagnose(const DiagnoseArgs& a) {
  const auto fc = load_chain(a.chain);
  const auto files = chain_files(a.chain);
  const int batches = a.batch_count > 0 ? a.batch_count : fc.chain.config.batch_count;
  const auto summary = summarize_chain(fc.chain, batches);
  const auto text = diagnostics_text(fc.chain, summary);
  OutputSet outputs(a.out_dir.empty() ? default_out_dir() : fs::path(a.out_dir));
  outputs.write("diagnostics.json", to_json(summary, true).dump(2) + "\n");
  outputs.write("diagnostics.txt", text);
  outputs.finish("diagnose", {{"chain", input_digest(files.csv)}, {"chain_sidecar", input_digest(files.sidecar)}},
                 {{"batch_count", batches}});
  std::cout << text;
  return kOk;
}

// ---- sbc --------------------------------------------------------------------

struct SbcArgs {
  int replications = 200;
  SbcOptions options;
  bool negative_control = false;
  std::string out_dir;
  Settings settings;
};

int cmd_sbc(SbcArgs& a) {
  const auto kv = a.settings.resolve(concat(kMcmcKeys, kPriorKeys));
  const auto prior = apply_prior_keys(kv, sbc_default_prior());
  auto cfg = apply_mcmc_keys(kv, sbc_default_config());
  if (a.negative_control) {
    cfg.updates.cluster_means = false;
    cfg.updates.recenter = false;
  }
  a.options.seed = cfg.seed;
  const auto report = sbc_check(prior, cfg, a.replications, a.options);
  json params = json::array();
  for (const auto& p : report.parameters)
    params.push_back({{"name", p.name}, {"histogram", p.histogram}, {"chi_square", p.chi_square},
                      {"p_value", p.p_value}, {"flagged", p.flagged}, {"ranks", p.ranks}});
  json j{{"replications", report.replications}, {"posterior_draws", report.posterior_draws}, {"parameters", params}};
  OutputSet outputs(a.out_dir.empty() ? default_out_dir() : fs::path(a.out_dir));
  outputs.write("sbc.json", j.dump(2) + "\n");
  json config{{"mcmc", bnpmeta::to_json(cfg)},
              {"prior", bnpmeta::to_json(prior)},
              {"replications", a.replications},
              {"observations", a.options.observations},
              {"moderators", a.options.moderators},
              {"negative_control", a.negative_control}};
  outputs.finish("sbc", json::object(), config);
  for (const auto& p : report.parameters)
    std::cout << p.name << " p=" << csv::format_double(p.p_value) << (p.flagged ? " FLAGGED" : "") << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian nonparametric meta-regression of heritability estimates"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  ComputeEsArgs es;
  auto* c_es = app.add_subcommand("compute-es", "Falconer h2 and sampling variance from twin correlations");
  c_es->add_option("--input", es.input, "Correlations CSV")->required()->check(CLI::ExistingFile);
  c_es->add_option("--output", es.output, "Output file name")->capture_default_str();
  c_es->add_flag("--pool", es.pool, "Inverse-variance pool informants within each study");
  c_es->add_option("--out-dir", es.out_dir, "Output directory (default $BNPMETA_OUTDIR or .)");

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Run the MCMC sampler and persist the chain");
  c_fit->add_option("--data", fit.data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  c_fit->add_option("--config", fit.settings.config_path, "Key-value config file")->check(CLI::ExistingFile);
  c_fit->add_option("--name", fit.name, "Chain file stem")->capture_default_str();
  c_fit->add_option("--out-dir", fit.out_dir, "Output directory (default $BNPMETA_OUTDIR or .)");
  fit.settings.add_options(c_fit, kMcmcKeys, "Sampler");
  fit.settings.add_options(c_fit, kPriorKeys, "Prior");

  PredictArgs pred;
  auto* c_pred = app.add_subcommand("predict", "Posterior predictive density, coefficient table, bias probe");
  c_pred->add_option("--chain", pred.chain, "Chain CSV (sidecar alongside)")->required();
  c_pred->add_option("--data", pred.data, "Dataset to verify the standardization against")
      ->check(CLI::ExistingFile);
  c_pred->add_option("--x", pred.x, "Moderator on the original scale, name=value (repeatable)");
  c_pred->add_option("--out-dir", pred.out_dir, "Output directory (default $BNPMETA_OUTDIR or .)");
  pred.grid.add(c_pred);

  ProfileArgs prof;
  auto* c_prof = app.add_subcommand("profile", "Predictive median and IQR by informant and age");
  c_prof->add_option("--chain", prof.chain, "Chain CSV (sidecar alongside)")->required();
  c_prof->add_option("--data", prof.data, "Dataset to verify the standardization against")
      ->check(CLI::ExistingFile);
  c_prof->add_option("--ages", prof.ages, "Ages (comma separated)")->required()->delimiter(',');
  c_prof->add_option("--informants", prof.informants, "Informants (comma separated)")->delimiter(',');
  c_prof->add_option("--out-dir", prof.out_dir, "Output directory (default $BNPMETA_OUTDIR or .)");
  prof.grid.add(c_prof);

  FitScoreArgs fs_args;
  auto* c_fs = app.add_subcommand("fit-score", "Predictive mean-square error D(m)");
  c_fs->add_option("--chain", fs_args.chain, "Chain CSV (sidecar alongside)")->required();
  c_fs->add_option("--data", fs_args.data, "Dataset the chain was fitted to")->required()->check(CLI::ExistingFile);
  c_fs->add_option("--out-dir", fs_args.out_dir, "Output directory (default $BNPMETA_OUTDIR or .)");

  DiagnoseArgs diag;
  auto* c_diag = app.add_subcommand("diagnose", "Posterior summaries and batch-means Monte Carlo error");
  c_diag->add_option("--chain", diag.chain, "Chain CSV (sidecar alongside)")->required();
  c_diag->add_option("--batch-count", diag.batch_count, "Batches (default: the fit's batch_count)");
  c_diag->add_option("--out-dir", diag.out_dir, "Output directory (default $BNPMETA_OUTDIR or .)");

  SbcArgs sbc;
  auto* c_sbc = app.add_subcommand("sbc", "Simulation-based calibration of the sampler");
  c_sbc->add_option("--replications", sbc.replications, "Replications")->capture_default_str();
  c_sbc->add_option("--observations", sbc.options.observations, "Observations per replication")
      ->capture_default_str();
  c_sbc->add_option("--moderators", sbc.options.moderators, "Moderators per replication")->capture_default_str();
  c_sbc->add_option("--bins", sbc.options.bins, "Rank histogram bins")->capture_default_str();
  c_sbc->add_flag("--negative-control", sbc.negative_control, "Skip the mu and recentering updates");
  c_sbc->add_option("--config", sbc.settings.config_path, "Key-value config file")->check(CLI::ExistingFile);
  c_sbc->add_option("--out-dir", sbc.out_dir, "Output directory (default $BNPMETA_OUTDIR or .)");
  sbc.settings.add_options(c_sbc, kMcmcKeys, "Sampler");
  sbc.settings.add_options(c_sbc, kPriorKeys, "Prior");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*c_es) return cmd_compute_es(es);
    if (*c_fit) return cmd_fit(fit);
    if (*c_pred) return cmd_predict(pred);
    if (*c_prof) return cmd_profile(prof);
    if (*c_fs) return cmd_fit_score(fs_args);
    if (*c_diag) return cmd_diagnose(diag);
    if (*c_sbc) return cmd_sbc(sbc);
  } catch (const SamplerError& e) {
    std::cerr << "error: sampler aborted: " << e.what() << '\n' << e.state_dump() << '\n';
    return kSamplerError;
  } catch (const ArtifactMismatch& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kMismatch;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kInputError;
}
