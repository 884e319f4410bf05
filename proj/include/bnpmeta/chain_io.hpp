#pragma once

// Chain persistence: one CSV row per retained draw plus a JSON sidecar with
// the sampler configuration, prior, window history and standardization.
//
// CSV columns: chain, iteration, log_post, phi, sigma_mu2, sigma_omega,
// beta[k]..., beta_omega[k]..., j_min, j_max, mu[j]..., n[j]...
// The mu/n columns span the union of every draw's window; cells outside a
// draw's own window are NA. Numbers use the shortest round-trip form, so a
// reloaded chain is bit-identical.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "bnpmeta/csv.hpp"
#include "bnpmeta/dataset.hpp"
#include "bnpmeta/digest.hpp"
#include "bnpmeta/mcmc.hpp"
#include "bnpmeta/model.hpp"
#include "bnpmeta/version.hpp"

namespace bnpmeta {

/// A persisted artifact does not match what it is being used with.
class ArtifactMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void write_chain_csv(std::ostream& out, const Chain& chain) {
  const auto p = chain.coefficients;
  int lo = 0, hi = 0;
  for (const auto& d : chain.draws) {
    lo = std::min(lo, d.state.mu.j_min());
    hi = std::max(hi, d.state.mu.j_max());
  }
  std::vector<std::string> header{"chain", "iteration", "log_post", "phi", "sigma_mu2", "sigma_omega"};
  for (Eigen::Index k = 0; k < p; ++k) header.push_back("beta[" + std::to_string(k) + "]");
  for (Eigen::Index k = 0; k < p; ++k) header.push_back("beta_omega[" + std::to_string(k) + "]");
  header.push_back("j_min");
  header.push_back("j_max");
  for (int j = lo; j <= hi; ++j) header.push_back("mu[" + std::to_string(j) + "]");
  for (int j = lo; j <= hi; ++j) header.push_back("n[" + std::to_string(j) + "]");
  csv::write_row(out, header);

  auto f = [](double v) { return csv::format_double(v); };
  std::vector<std::string> row;
  for (const auto& d : chain.draws) {
    const auto& s = d.state;
    if (s.beta.size() != p || s.beta_omega.size() != p)
      throw std::invalid_argument("write_chain_csv: draw has the wrong number of coefficients");
    row = {std::to_string(d.chain), std::to_string(d.iteration), f(d.log_posterior), f(s.phi), f(s.sigma_mu2),
           f(s.sigma_omega)};
    for (Eigen::Index k = 0; k < p; ++k) row.push_back(f(s.beta[k]));
    for (Eigen::Index k = 0; k < p; ++k) row.push_back(f(s.beta_omega[k]));
    row.push_back(std::to_string(s.mu.j_min()));
    row.push_back(std::to_string(s.mu.j_max()));
    for (int j = lo; j <= hi; ++j) row.push_back(s.mu.contains(j) ? f(s.mu[j]) : "NA");
    const bool counts = d.occupancy.size() == s.mu.size();
    for (int j = lo; j <= hi; ++j)
      row.push_back(counts && s.mu.contains(j)
                        ? std::to_string(d.occupancy[static_cast<std::size_t>(j - s.mu.j_min())])
                        : "NA");
    csv::write_row(out, row);
  }
}

namespace detail {

// Parses "name[<int>]" and returns the index.
inline std::optional<long> bracket_index(const std::string& column, std::string_view name) {
  if (column.size() < name.size() + 3 || column.compare(0, name.size(), name) != 0 || column[name.size()] != '[' ||
      column.back() != ']')
    return std::nullopt;
  return csv::parse_integer(std::string_view(column).substr(name.size() + 1, column.size() - name.size() - 2));
}

}  // namespace detail

/// Reads draws written by write_chain_csv. `closed_window` is not stored per
/// row; it is taken from the caller (usually the sidecar's config).
inline std::vector<Draw> read_chain_csv(std::istream& in, bool closed_window, Eigen::Index* coefficients = nullptr) {
  const auto table = csv::read(in);
  const auto& h = table.header;
  const std::vector<std::string> fixed{"chain", "iteration", "log_post", "phi", "sigma_mu2", "sigma_omega"};
  if (h.size() < fixed.size() || !std::equal(fixed.begin(), fixed.end(), h.begin()))
    throw std::invalid_argument("chain file: unexpected header");
  std::size_t c = fixed.size();
  Eigen::Index p = 0;
  while (c < h.size() && detail::bracket_index(h[c], "beta") == p) ++p, ++c;
  for (Eigen::Index k = 0; k < p; ++k, ++c)
    if (c >= h.size() || detail::bracket_index(h[c], "beta_omega") != k)
      throw std::invalid_argument("chain file: expected column beta_omega[" + std::to_string(k) + "]");
  if (p == 0) throw std::invalid_argument("chain file: no beta columns");
  if (c + 2 > h.size() || h[c] != "j_min" || h[c + 1] != "j_max")
    throw std::invalid_argument("chain file: expected j_min, j_max");
  c += 2;
  const std::size_t mu_start = c;
  const auto first = c < h.size() ? detail::bracket_index(h[c], "mu") : std::nullopt;
  if (!first) throw std::invalid_argument("chain file: no mu columns");
  const int lo = static_cast<int>(*first);
  int cells = 0;
  while (c < h.size() && detail::bracket_index(h[c], "mu") == lo + cells) ++cells, ++c;
  for (int k = 0; k < cells; ++k, ++c)
    if (c >= h.size() || detail::bracket_index(h[c], "n") != lo + k)
      throw std::invalid_argument("chain file: mu and n columns disagree");
  if (c != h.size()) throw std::invalid_argument("chain file: unexpected column '" + h[c] + "'");
  if (coefficients) *coefficients = p;

  std::vector<Draw> draws;
  for (const auto& row : table.rows) {
    if (row.cells.size() != h.size())
      throw std::invalid_argument("chain file line " + std::to_string(row.line) + ": wrong number of cells");
    auto num = [&](std::size_t k) {
      const auto v = csv::parse_double(row.cells[k]);
      if (!v) throw std::invalid_argument("chain file line " + std::to_string(row.line) + ": bad value in " + h[k]);
      return *v;
    };
    auto integer = [&](std::size_t k) {
      const auto v = csv::parse_integer(row.cells[k]);
      if (!v) throw std::invalid_argument("chain file line " + std::to_string(row.line) + ": bad integer in " + h[k]);
      return *v;
    };
    Draw d;
    d.chain = static_cast<int>(integer(0));
    d.iteration = integer(1);
    d.log_posterior = csv::parse_double(row.cells[2]).value_or(kNaN);
    d.closed_window = closed_window;
    auto& s = d.state;
    s.phi = num(3);
    s.sigma_mu2 = num(4);
    s.sigma_omega = num(5);
    s.beta.resize(p);
    s.beta_omega.resize(p);
    std::size_t k = fixed.size();
    for (Eigen::Index q = 0; q < p; ++q) s.beta[q] = num(k++);
    for (Eigen::Index q = 0; q < p; ++q) s.beta_omega[q] = num(k++);
    const int j_min = static_cast<int>(integer(k++));
    const int j_max = static_cast<int>(integer(k++));
    if (j_min < lo || j_max >= lo + cells || j_min > 0 || j_max < 0)
      throw std::invalid_argument("chain file line " + std::to_string(row.line) + ": window out of range");
    std::vector<double> mu;
    std::vector<int> counts;
    bool have_counts = true;
    for (int j = j_min; j <= j_max; ++j) {
      const std::size_t col = mu_start + static_cast<std::size_t>(j - lo);
      mu.push_back(num(col));
      const auto n = csv::parse_integer(row.cells[col + static_cast<std::size_t>(cells)]);
      if (n)
        counts.push_back(static_cast<int>(*n));
      else
        have_counts = false;
    }
    s.mu = ClusterMeans(j_min, std::move(mu));
    if (have_counts) d.occupancy = std::move(counts);
    draws.push_back(std::move(d));
  }
  return draws;
}

inline nlohmann::json to_json(const PriorConfig& p) {
  return {{"beta0_var", p.beta0_var},
          {"slope_var", p.slope_var},
          {"phi_shape", p.phi_shape},
          {"phi_rate", p.phi_rate},
          {"sigma_mu2_upper", p.sigma_mu2_upper},
          {"beta_omega_var", p.beta_omega_var},
          {"sigma_omega_prec_shape", p.sigma_omega_prec_shape},
          {"sigma_omega_prec_rate", p.sigma_omega_prec_rate},
          {"mu_prior", to_string(p.mu_prior)},
          {"mu_fixed_var", p.mu_fixed_var},
          {"sigma_omega_prior", to_string(p.sigma_omega_prior)}};
}

inline PriorConfig prior_from_json(const nlohmann::json& j) {
  KeyValues kv;
  for (const auto& [key, value] : j.items())
    kv[key] = value.is_string() ? value.get<std::string>() : csv::format_double(value.get<double>());
  return apply_prior_keys(kv);
}

inline nlohmann::json to_json(const McmcConfig& c) {
  nlohmann::json j{{"iterations", c.iterations},
                   {"burn_in", c.burn_in},
                   {"thin", c.thin},
                   {"seed", c.seed},
                   {"batch_count", c.batch_count},
                   {"chains", c.chains},
                   {"tail_mass_tol", c.tail_mass_tol},
                   {"max_window_cells", c.max_window_cells},
                   {"track_log_posterior", c.track_log_posterior}};
  j["fixed_window"] = c.fixed_window ? nlohmann::json::array({c.fixed_window->first, c.fixed_window->second})
                                     : nlohmann::json(nullptr);
  const auto& u = c.updates;
  j["updates"] = {{"assignments", u.assignments},
                  {"probit_latents", u.probit_latents},
                  {"probit_coefficients", u.probit_coefficients},
                  {"probit_scale", u.probit_scale},
                  {"cluster_means", u.cluster_means},
                  {"regression", u.regression},
                  {"dispersion", u.dispersion},
                  {"random_effect_variance", u.random_effect_variance},
                  {"recenter", u.recenter},
                  {"window", u.window}};
  return j;
}

inline McmcConfig mcmc_config_from_json(const nlohmann::json& j) {
  McmcConfig c;
  c.iterations = j.at("iterations").get<long>();
  c.burn_in = j.at("burn_in").get<long>();
  c.thin = j.at("thin").get<long>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.batch_count = j.at("batch_count").get<int>();
  c.chains = j.at("chains").get<int>();
  c.tail_mass_tol = j.at("tail_mass_tol").get<double>();
  c.max_window_cells = j.at("max_window_cells").get<int>();
  c.track_log_posterior = j.at("track_log_posterior").get<bool>();
  if (const auto& w = j.at("fixed_window"); !w.is_null()) c.fixed_window = std::pair<int, int>{w.at(0), w.at(1)};
  const auto& u = j.at("updates");
  c.updates.assignments = u.at("assignments");
  c.updates.probit_latents = u.at("probit_latents");
  c.updates.probit_coefficients = u.at("probit_coefficients");
  c.updates.probit_scale = u.at("probit_scale");
  c.updates.cluster_means = u.at("cluster_means");
  c.updates.regression = u.at("regression");
  c.updates.dispersion = u.at("dispersion");
  c.updates.random_effect_variance = u.at("random_effect_variance");
  c.updates.recenter = u.at("recenter");
  c.updates.window = u.at("window");
  c.validate();
  return c;
}

inline nlohmann::json to_json(const Standardization& s) {
  nlohmann::json cols = nlohmann::json::array();
  for (std::size_t k = 0; k < s.size(); ++k)
    cols.push_back({{"name", s.names[k]},
                    {"center", s.centers[k]},
                    {"scale", s.scales[k]},
                    {"constant", static_cast<bool>(s.constant[k])},
                    {"min", s.minimums[k]},
                    {"max", s.maximums[k]}});
  return cols;
}

inline Standardization standardization_from_json(const nlohmann::json& j) {
  Standardization s;
  for (const auto& c : j) {
    s.names.push_back(c.at("name").get<std::string>());
    s.centers.push_back(c.at("center").get<double>());
    s.scales.push_back(c.at("scale").get<double>());
    s.constant.push_back(c.at("constant").get<bool>());
    s.minimums.push_back(c.at("min").get<double>());
    s.maximums.push_back(c.at("max").get<double>());
  }
  return s;
}

/// A chain together with the moderator standardization it was fitted under.
struct FittedChain {
  Chain chain;
  std::optional<Standardization> standardization;
};

struct ChainFiles {
  std::filesystem::path csv;
  std::filesystem::path sidecar;
};

inline ChainFiles chain_files(const std::filesystem::path& stem) {
  auto csv_path = stem;
  auto json_path = stem;
  return {csv_path.replace_extension(".csv"), json_path.replace_extension(".json")};
}

inline nlohmann::json chain_sidecar(const FittedChain& fc, const std::string& chain_digest) {
  const auto& c = fc.chain;
  nlohmann::json windows = nlohmann::json::array();
  for (std::size_t k = 0; k < c.windows.size(); ++k)
    windows.push_back({{"chain", k}, {"j_min", c.windows[k].j_min}, {"j_max", c.windows[k].j_max},
                       {"changes", c.windows[k].changes}});
  nlohmann::json j;
  j["version"] = kVersion;
  j["seed"] = c.config.seed;
  j["config"] = to_json(c.config);
  j["prior"] = to_json(c.prior);
  j["coefficients"] = c.coefficients;
  j["draws"] = c.size();
  j["windows"] = windows;
  j["standardization"] = fc.standardization ? to_json(*fc.standardization) : nlohmann::json(nullptr);
  j["chain_sha256"] = chain_digest;
  return j;
}

/// Writes <stem>.csv and <stem>.json and returns their paths.
inline ChainFiles save_chain(const std::filesystem::path& stem, const FittedChain& fc) {
  const auto files = chain_files(stem);
  std::ostringstream body;
  write_chain_csv(body, fc.chain);
  const std::string text = body.str();
  {
    std::ofstream out(files.csv, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + files.csv.string());
    out << text;
  }
  std::ofstream out(files.sidecar, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + files.sidecar.string());
  out << chain_sidecar(fc, sha256_hex(text)).dump(2) << '\n';
  return files;
}

/// Loads a chain saved by save_chain; `path` may name the CSV, the sidecar or
/// the common stem. Throws ArtifactMismatch if the CSV digest disagrees with
/// the sidecar.
inline FittedChain load_chain(const std::filesystem::path& path) {
  const auto files = chain_files(path);
  std::ifstream side(files.sidecar);
  if (!side) throw std::runtime_error("cannot read " + files.sidecar.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(side);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(files.sidecar.string() + ": " + e.what());
  }
  const std::string digest = sha256_file(files.csv);
  if (digest != j.at("chain_sha256").get<std::string>())
    throw ArtifactMismatch(files.csv.string() + " does not match the digest recorded in " + files.sidecar.string());

  FittedChain fc;
  auto& c = fc.chain;
  c.config = mcmc_config_from_json(j.at("config"));
  c.prior = prior_from_json(j.at("prior"));
  for (const auto& w : j.at("windows"))
    c.windows.push_back({w.at("j_min").get<int>(), w.at("j_max").get<int>(), w.at("changes").get<long>()});
  std::ifstream in(files.csv, std::ios::binary);
  Eigen::Index p = 0;
  c.draws = read_chain_csv(in, c.config.fixed_window.has_value(), &p);
  c.coefficients = j.at("coefficients").get<Eigen::Index>();
  if (!c.draws.empty() && p != c.coefficients)
    throw ArtifactMismatch("chain file and sidecar disagree on the number of coefficients");
  if (const auto& s = j.at("standardization"); !s.is_null()) fc.standardization = standardization_from_json(s);
  return fc;
}

}  // namespace bnpmeta
