#pragma once

// Simulation-based calibration: draw parameters from the prior, data from
// the model, fit, and check that the rank of each true parameter among its
// posterior draws is uniform.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bnpmeta/distributions.hpp"
#include "bnpmeta/mcmc.hpp"
#include "bnpmeta/model.hpp"
#include "bnpmeta/random.hpp"

namespace bnpmeta {

struct SbcOptions {
  int observations = 20;
  int moderators = 3;
  std::pair<int, int> window{-2, 2};  // closed
  double var_min = 0.001;
  double var_max = 0.01;
  int bins = 10;
  double alpha = 0.01;
  std::uint64_t seed = 1;
};

struct SbcParameter {
  std::string name;
  std::vector<long> ranks;
  std::vector<long> histogram;
  double chi_square = 0.0;
  double p_value = kNaN;
  bool flagged = false;  // p < alpha
};

struct SbcReport {
  int replications = 0;
  long posterior_draws = 0;
  std::vector<SbcParameter> parameters;

  const SbcParameter* find(std::string_view name) const {
    for (const auto& p : parameters)
      if (p.name == name) return &p;
    return nullptr;
  }
  bool any_flagged() const {
    for (const auto& p : parameters)
      if (p.flagged) return true;
    return false;
  }
};

/// Proper, moderately informative prior for calibration runs; the default
/// flat-ish hyperparameters make prior draws of the data span many orders of
/// magnitude.
inline PriorConfig sbc_default_prior() {
  PriorConfig p;
  p.beta0_var = 1.0;
  p.beta_omega_var = 1.0;
  p.sigma_mu2_upper = 1.0;
  return p;
}

inline McmcConfig sbc_default_config() {
  McmcConfig c;
  c.iterations = 12000;
  c.burn_in = 4000;
  c.thin = 80;
  c.track_log_posterior = false;
  return c;
}

/// A prior draw of the reduced model plus data generated from it.
struct SbcReplicate {
  ModelState truth;
  Design design;
};

inline ModelState draw_from_prior(const PriorConfig& prior, Eigen::Index coefficients, std::pair<int, int> window,
                                  Rng& rng) {
  ModelState s = ModelState::zeros(coefficients);
  for (Eigen::Index k = 0; k < coefficients; ++k) {
    s.beta[k] = rng.normal(0.0, std::sqrt(k == 0 ? prior.beta0_var : prior.slope_var));
    s.beta_omega[k] = rng.normal(0.0, std::sqrt(prior.beta_omega_var));
  }
  s.phi = rng.gamma(prior.phi_shape, prior.phi_rate);
  s.sigma_mu2 = prior.mu_prior == MuPrior::hierarchical ? prior.sigma_mu2_upper * rng.uniform_open()
                                                        : prior.mu_fixed_var;
  const double g = rng.gamma(prior.sigma_omega_prec_shape, prior.sigma_omega_prec_rate);
  s.sigma_omega = prior.sigma_omega_prior == SigmaOmegaPrior::precision ? 1.0 / std::sqrt(g) : std::sqrt(g);
  std::vector<double> mu(static_cast<std::size_t>(window.second - window.first + 1));
  for (auto& m : mu) m = rng.normal(0.0, std::sqrt(s.sigma_mu2));
  s.mu = ClusterMeans(window.first, std::move(mu));
  return s;
}

/// Observations from the closed-window model at `truth`; moderators are iid
/// standard normal, sampling variances uniform on [var_min, var_max].
inline Design simulate_design(const ModelState& truth, const SbcOptions& opt, Rng& rng) {
  const Eigen::Index n = opt.observations;
  Design d;
  d.y.resize(n);
  d.var.resize(n);
  d.x.resize(n, opt.moderators + 1);
  const WeightWindow w{truth.mu.j_min(), truth.mu.j_max(), 0.0, true};
  for (Eigen::Index i = 0; i < n; ++i) {
    d.x(i, 0) = 1.0;
    for (int k = 1; k <= opt.moderators; ++k) d.x(i, k) = rng.normal();
    d.var[i] = opt.var_min + (opt.var_max - opt.var_min) * rng.uniform();
    const double u = d.x.row(i).dot(truth.beta_omega) + truth.sigma_omega * rng.normal();
    int z = w.j_min;
    while (z < w.j_max && u > z) ++z;
    d.y[i] = d.x.row(i).dot(truth.beta) + truth.mu[z] + std::sqrt(truth.phi * d.var[i]) * rng.normal();
  }
  return d;
}

inline SbcReplicate sbc_replicate(const PriorConfig& prior, const SbcOptions& opt, int replication) {
  Rng rng(opt.seed, 0x5bc00000ULL + static_cast<std::uint64_t>(replication));
  SbcReplicate r;
  r.truth = draw_from_prior(prior, opt.moderators + 1, opt.window, rng);
  r.design = simulate_design(r.truth, opt, rng);
  return r;
}

inline const std::vector<std::string>& sbc_parameter_names() {
  static const std::vector<std::string> names{"beta[0]", "beta[1]", "phi", "sigma_omega", "sigma_mu2", "baseline_mean"};
  return names;
}

// Mean of the closed-window mixture at x = 0. Individual mu_j are not ranked:
// their labels are only weakly identified and a Gibbs chain rarely swaps them.
inline double baseline_mixture_mean(const ModelState& s) {
  const WeightWindow w{s.mu.j_min(), s.mu.j_max(), 0.0, true};
  double m = s.beta[0];
  for (int j = w.j_min; j <= w.j_max; ++j) m += std::exp(log_cell_weight(j, s.beta_omega[0], s.sigma_omega, w)) * s.mu[j];
  return m;
}

inline std::vector<double> sbc_parameter_values(const ModelState& s) {
  return {s.beta[0], s.beta[1], s.phi, s.sigma_omega, s.sigma_mu2, baseline_mixture_mean(s)};
}

/// Runs `replications` SBC replications of the closed-window model. The
/// sampler uses `cfg` (burn-in, thinning and update mask) with its window
/// forced to opt.window; it starts from its default initialization, not from
/// the truth. Zero replications give an empty report.
inline SbcReport sbc_check(const PriorConfig& prior, McmcConfig cfg, int replications, const SbcOptions& opt = {}) {
  SbcReport report;
  report.replications = std::max(0, replications);
  if (replications <= 0) return report;
  prior.validate();
  if (opt.moderators < 1) throw std::invalid_argument("sbc_check: need at least one moderator");
  if (opt.bins < 2) throw std::invalid_argument("sbc_check: need at least 2 bins");
  cfg.fixed_window = opt.window;
  cfg.chains = 1;
  cfg.track_log_posterior = false;
  cfg.validate();
  report.posterior_draws = cfg.retained();

  const auto& names = sbc_parameter_names();
  for (const auto& n : names) report.parameters.push_back({n, {}, std::vector<long>(static_cast<std::size_t>(opt.bins), 0)});
  for (int r = 0; r < replications; ++r) {
    const auto rep = sbc_replicate(prior, opt, r);
    McmcConfig run = cfg;
    run.seed = cfg.seed + static_cast<std::uint64_t>(r);
    const auto chain = run_chain(rep.design, prior, run);
    const auto truth = sbc_parameter_values(rep.truth);
    std::vector<long> rank(truth.size(), 0);
    for (const auto& d : chain.draws) {
      const auto v = sbc_parameter_values(d.state);
      for (std::size_t k = 0; k < v.size(); ++k) rank[k] += v[k] < truth[k] ? 1 : 0;
    }
    for (std::size_t k = 0; k < rank.size(); ++k) {
      auto& par = report.parameters[k];
      par.ranks.push_back(rank[k]);
      const auto bin = rank[k] * opt.bins / (report.posterior_draws + 1);
      ++par.histogram[static_cast<std::size_t>(bin)];
    }
  }
  // Ranks take L + 1 values; bins of unequal width get proportional expectations.
  const long values = report.posterior_draws + 1;
  for (auto& par : report.parameters) {
    double stat = 0.0;
    for (int b = 0; b < opt.bins; ++b) {
      long width = 0;
      for (long v = 0; v < values; ++v) width += v * opt.bins / values == b ? 1 : 0;
      const double expected = static_cast<double>(replications) * static_cast<double>(width) / static_cast<double>(values);
      if (expected <= 0.0) continue;
      const double diff = static_cast<double>(par.histogram[static_cast<std::size_t>(b)]) - expected;
      stat += diff * diff / expected;
    }
    par.chi_square = stat;
    par.p_value = chi_square_survival(stat, opt.bins - 1);
    par.flagged = par.p_value < opt.alpha;
  }
  return report;
}

}  // namespace bnpmeta
