// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Pass criterion numbers to run a subset.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bnpmeta/bnpmeta.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace bnpmeta;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1: Falconer estimator against simulated twin samples ------------------

Outcome falconer_oracle() {
  const int reps = 1000;
  std::vector<double> h2(reps), var(reps);
  for (int r = 0; r < reps; ++r) {
    const auto c = simulate_twin_sample(0.5, 0.2, 500, 500, 1000 + static_cast<std::uint64_t>(r));
    h2[r] = falconer_h2(c);
    var[r] = falconer_variance(c);
  }
  double mean = 0.0, mean_var = 0.0;
  for (int r = 0; r < reps; ++r) {
    mean += h2[r] / reps;
    mean_var += var[r] / reps;
  }
  double empirical = 0.0;
  for (double v : h2) empirical += (v - mean) * (v - mean) / (reps - 1);
  const double rel = std::abs(empirical / mean_var - 1.0);
  return {std::abs(mean - 0.5) <= 0.02 && rel <= 0.10,
          "mean h2 " + fmt(mean) + ", empirical var " + fmt(empirical) + " vs formula " + fmt(mean_var) + " (" +
              fmt(100 * rel, 3) + "% off)"};
}

// ---- 2: single-cell model against quadrature ---------------------------------

Outcome conjugate_oracle() {
  Design d;
  d.y.resize(3);
  d.var.resize(3);
  d.x.resize(3, 2);
  d.y << 0.42, 0.55, 0.71;
  d.var << 0.010, 0.015, 0.012;
  d.x << 1, -1.0, 1, 0.1, 1, 0.9;
  PriorConfig prior;
  prior.phi_shape = 10.0;
  prior.phi_rate = 10.0;
  McmcConfig cfg;
  cfg.iterations = 20000;
  cfg.burn_in = 1000;
  cfg.seed = 1;
  cfg.fixed_window = std::pair<int, int>{0, 0};
  cfg.updates.cluster_means = false;
  cfg.updates.random_effect_variance = false;
  cfg.updates.recenter = false;
  ModelState init = ModelState::zeros(2);
  init.mu = ClusterMeans(0, {0.0});
  const auto chain = run_chain(d, prior, cfg, init);
  const auto summary = summarize_chain(chain, 50);
  const auto oracle = oracles::single_cluster_posterior(d, prior);
  double worst = 0.0;
  std::string detail;
  for (int k = 0; k < 2; ++k) {
    const auto* p = summary.find("beta[" + std::to_string(k) + "]");
    const double em = std::abs(p->mean / oracle.mean[k] - 1.0), es = std::abs(p->sd / oracle.sd[k] - 1.0);
    worst = std::max({worst, em, es});
    detail += "beta[" + std::to_string(k) + "] mean " + fmt(p->mean) + "/" + fmt(oracle.mean[k]) + " sd " +
              fmt(p->sd) + "/" + fmt(oracle.sd[k]) + "; ";
  }
  return {worst <= 0.02, detail + "worst relative error " + fmt(100 * worst, 3) + "%"};
}

// ---- 3: weights and densities normalize --------------------------------------

Outcome normalization() {
  Rng rng(3, 0);
  double worst_lo = 1.0, worst_hi = 0.0;
  for (int r = 0; r < 1000; ++r) {
    const int p = 1 + static_cast<int>(5 * rng.uniform());
    Eigen::VectorXd x(p), bw(p);
    x[0] = 1.0;
    for (int k = 1; k < p; ++k) x[k] = rng.normal(0.0, 2.0);
    for (int k = 0; k < p; ++k) bw[k] = rng.normal(0.0, 3.0);
    const double sigma = std::exp(rng.normal(0.0, 1.5));
    const double eta = x.dot(bw);
    const auto [lo, hi] = required_window(std::span<const double>(&eta, 1), sigma, 1e-8);
    const WeightWindow w{lo, hi, 1e-8, false};
    long double acc = 0.0L;
    for (int j = lo; j <= hi; ++j) acc += std::exp(static_cast<long double>(log_cell_weight(j, eta, sigma, w)));
    const double sum = static_cast<double>(acc);
    worst_lo = std::min(worst_lo, sum);
    worst_hi = std::max(worst_hi, sum);
  }
  const bool weights_ok = worst_lo >= 1.0 - 1e-6 && worst_hi <= 1.0;

  double dens_lo = 2.0, dens_hi = 0.0;
  const PriorConfig prior = sbc_default_prior();
  for (int r = 0; r < 100; ++r) {
    const int lo = -static_cast<int>(4 * rng.uniform()), hi = static_cast<int>(4 * rng.uniform());
    auto s = draw_from_prior(prior, 3, {lo, hi}, rng);
    s.phi = std::exp(rng.normal(0.0, 0.7));
    Eigen::VectorXd x(3);
    x << 1.0, rng.normal(), rng.normal();
    const double var = 0.001 + 0.009 * rng.uniform();
    const WeightWindow w{lo, hi, 1e-8, rng.uniform() < 0.5};
    const double center = x.dot(s.beta);
    double spread = std::sqrt(s.phi * var + s.sigma_mu2);
    for (int j = lo; j <= hi; ++j) spread = std::max(spread, std::abs(s.mu[j]) + std::sqrt(s.phi * var));
    const GridSpec grid{center - 10.0 * spread, center + 10.0 * spread, 20001};
    const auto ys = grid.values();
    std::vector<double> f(ys.size());
    for (std::size_t k = 0; k < ys.size(); ++k) f[k] = likelihood_density(ys[k], var, x, s, w);
    const double integral = trapezoid(ys, f);
    dens_lo = std::min(dens_lo, integral);
    dens_hi = std::max(dens_hi, integral);
  }
  const bool density_ok = dens_lo >= 0.99 && dens_hi <= 1.01;
  return {weights_ok && density_ok, "weight sums in [" + fmt(worst_lo, 12) + ", " + fmt(worst_hi, 17) +
                                        "], density integrals in [" + fmt(dens_lo, 8) + ", " + fmt(dens_hi, 8) + "]"};
}

// ---- 4: D(m) moment form equals its integral form ----------------------------

Outcome fit_score_identity() {
  Rng rng(4, 0);
  const PriorConfig prior = sbc_default_prior();
  double worst = 0.0;
  for (int r = 0; r < 50; ++r) {
    Chain chain;
    chain.coefficients = 3;
    const int draws = 5 + static_cast<int>(10 * rng.uniform());
    for (int t = 0; t < draws; ++t) {
      const int lo = -static_cast<int>(3 * rng.uniform()), hi = static_cast<int>(3 * rng.uniform());
      Draw dr;
      dr.state = draw_from_prior(prior, 3, {lo, hi}, rng);
      dr.state.phi = std::exp(rng.normal(0.0, 0.7));
      dr.closed_window = rng.uniform() < 0.5;
      dr.iteration = t;
      for (int j = lo; j <= hi; ++j) dr.occupancy.push_back(rng.uniform() < 0.3 ? 0 : 1);
      chain.draws.push_back(std::move(dr));
    }
    Design d;
    d.y.resize(1);
    d.var.resize(1);
    d.x.resize(1, 3);
    d.x << 1.0, rng.normal(), rng.normal();
    d.var[0] = 0.001 + 0.009 * rng.uniform();
    d.y[0] = rng.normal(0.5, 0.5);

    const auto comps = predictive_components(chain.draws, d.x.row(0).transpose(), d.var[0]);
    double lo = d.y[0], hi = d.y[0], min_sd = kInf;
    for (const auto& c : comps) {
      const double sd = std::sqrt(c.variance);
      lo = std::min(lo, c.mean - 12.0 * sd);
      hi = std::max(hi, c.mean + 12.0 * sd);
      min_sd = std::min(min_sd, sd);
    }
    const int points = static_cast<int>(std::ceil((hi - lo) / (min_sd / 8.0))) + 1;
    const double moment = fit_score(chain, d).per_obs[0];
    const double integral = fit_score_integral(chain, d, GridSpec{lo, hi, points})[0];
    worst = std::max(worst, std::abs(moment - integral));
  }
  return {worst <= 1e-6, "largest |bias^2 + variance - integral| " + fmt(worst, 3)};
}

// ---- 5: two-cluster data yields two predictive modes -------------------------

Outcome bimodality() {
  const auto schema = ModeratorSchema::canonical();
  int hits = 0;
  double slowest = 0.0;
  std::string modes_seen;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed, 99);
    std::vector<EffectSizeRecord> recs;
    for (int i = 0; i < 89; ++i) {
      EffectSizeRecord r;
      r.study_id = "s" + std::to_string(i);
      r.var = 0.001 + 0.009 * rng.uniform();
      const double m = rng.uniform() < 0.5 ? 0.51 : 0.72;
      r.y = m + std::sqrt(r.var) * rng.normal();
      r.x.assign(schema.size(), 0.0);
      recs.push_back(r);
    }
    const auto data = standardize(recs, schema, nullptr);
    McmcConfig cfg;
    cfg.iterations = 50000;
    cfg.burn_in = 5000;
    cfg.seed = seed;
    cfg.track_log_posterior = false;
    const auto t0 = std::chrono::steady_clock::now();
    const auto chain = run_chain(data, PriorConfig{}, cfg);
    const auto d = predictive_density(chain, PredictiveQuery::baseline(schema.size()), data.standardization);
    slowest = std::max(slowest, seconds_since(t0));
    const bool ok = d.modes.size() == 2 && std::abs(d.modes[0] - 0.51) <= 0.05 && std::abs(d.modes[1] - 0.72) <= 0.05;
    hits += ok ? 1 : 0;
    modes_seen += " {";
    for (std::size_t k = 0; k < d.modes.size(); ++k) modes_seen += (k ? "," : "") + fmt(d.modes[k], 3);
    modes_seen += "}";
  }
  return {hits >= 9 && slowest < 600.0,
          std::to_string(hits) + "/10 runs recovered both modes, slowest run " + fmt(slowest, 3) + " s; modes" +
              modes_seen};
}

// ---- 6: planted slope is detected, null slopes are covered -------------------

Outcome slope_recovery() {
  const int reps = 20, nulls = 10, n = 89;
  int detected = 0;
  std::vector<int> covered(nulls, 0);
  for (int r = 0; r < reps; ++r) {
    Rng rng(600 + static_cast<std::uint64_t>(r), 0);
    Design d;
    d.y.resize(n);
    d.var.resize(n);
    d.x.resize(n, nulls + 2);
    for (int i = 0; i < n; ++i) {
      d.x(i, 0) = 1.0;
      for (int k = 1; k <= nulls + 1; ++k) d.x(i, k) = rng.normal();
    }
    for (int k = 1; k <= nulls + 1; ++k) {
      const double m = d.x.col(k).mean();
      const double sd = std::sqrt((d.x.col(k).array() - m).square().sum() / (n - 1));
      d.x.col(k) = (d.x.col(k).array() - m) / sd;
    }
    for (int i = 0; i < n; ++i) {
      d.var[i] = 0.001 + 0.009 * rng.uniform();
      d.y[i] = 0.6 + 0.12 * d.x(i, 1) + rng.normal(0.0, 0.05) + std::sqrt(d.var[i]) * rng.normal();
    }
    McmcConfig cfg;
    cfg.iterations = 10000;
    cfg.burn_in = 2000;
    cfg.seed = 600 + static_cast<std::uint64_t>(r);
    cfg.track_log_posterior = false;
    const auto summary = summarize_chain(run_chain(d, PriorConfig{}, cfg), 50);
    const auto* planted = summary.find("beta[1]");
    detected += planted->q025 > 0.0 || planted->q975 < 0.0 ? 1 : 0;
    for (int k = 0; k < nulls; ++k) {
      const auto* p = summary.find("beta[" + std::to_string(k + 2) + "]");
      covered[k] += p->q025 <= 0.0 && p->q975 >= 0.0 ? 1 : 0;
    }
  }
  const int worst = *std::min_element(covered.begin(), covered.end());
  std::string counts;
  for (int c : covered) counts += " " + std::to_string(c);
  return {detected >= 16 && worst >= 17, "planted slope detected in " + std::to_string(detected) +
                                             "/20; null coverage counts" + counts};
}

// ---- 7: simulation-based calibration -----------------------------------------

Outcome calibration() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = sbc_check(sbc_default_prior(), sbc_default_config(), 200, SbcOptions{});
  const double elapsed = seconds_since(t0);
  bool ok = elapsed < 1800.0;
  std::string detail;
  for (const char* name : {"beta[0]", "beta[1]", "phi", "sigma_omega"}) {
    const auto* p = report.find(name);
    ok = ok && p && p->p_value > 0.01;
    detail += std::string(name) + " p=" + fmt(p ? p->p_value : kNaN, 3) + " ";
  }
  return {ok, detail + "(200 replications)"};
}

// ---- 8: determinism and batch means ------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const auto dir = fs::temp_directory_path() / "bnpmeta_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir / "a");
  fs::create_directories(dir / "b");
  {
    std::ofstream out(dir / "data.csv", std::ios::binary);
    out << fixtures::to_csv(fixtures::random_records(40, 8));
  }
  bool same = true;
  for (const char* sub : {"a", "b"}) {
    const std::string cmd = "\"" BNPMETA_CLI_PATH "\" fit --data \"" + (dir / "data.csv").string() +
                            "\" --iterations 3000 --burn-in 500 --seed 42 --out-dir \"" + (dir / sub).string() +
                            "\" >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    same = same && WIFEXITED(status) && WEXITSTATUS(status) == 0;
  }
  for (const char* f : {"chain.csv", "chain.json"}) {
    const auto a = slurp(dir / "a" / f), b = slurp(dir / "b" / f);
    same = same && !a.empty() && a == b;
  }

  Rng rng(8, 0);
  std::vector<double> series(1000000);
  for (auto& v : series) v = rng.normal();
  const double hw = batch_means_ci(series, 50).half_width;
  const bool hw_ok = std::abs(hw / 0.00196 - 1.0) <= 0.20;
  return {same && hw_ok, std::string(same ? "chain files identical" : "chain files differ") +
                             "; iid half-width " + fmt(hw) + " vs .00196"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"falconer oracle", falconer_oracle},   {"conjugate oracle", conjugate_oracle},
      {"normalization", normalization},       {"D(m) identity", fit_score_identity},
      {"bimodality recovery", bimodality},    {"slope recovery", slope_recovery},
      {"calibration", calibration},           {"determinism", determinism}};
  const std::vector<double> budgets{60.0, 60.0, kInf, kInf, kInf, kInf, 1800.0, kInf};

  std::set<int> selected;
  for (int a = 1; a < argc; ++a) selected.insert(std::atoi(argv[a]));

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double elapsed = seconds_since(t0);
    if (elapsed >= budgets[k]) {
      o.pass = false;
      o.detail += "; over the " + fmt(budgets[k]) + " s budget";
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[k].first << ": " << o.detail << " ("
              << std::fixed << std::setprecision(1) << elapsed << " s)" << std::defaultfloat << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
