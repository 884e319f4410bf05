#pragma once

// Blocked Gibbs sampler for the mixture meta-regression, with the ordered
// probit weights augmented by latent cell indicators z_i and latent normals
// u_i. Every block except phi, sigma_mu2 (and sigma_w under the variance
// prior) is drawn from a conjugate full conditional; those three use slice
// sampling on the log scale.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "bnpmeta/csv.hpp"
#include "bnpmeta/dataset.hpp"
#include "bnpmeta/design.hpp"
#include "bnpmeta/distributions.hpp"
#include "bnpmeta/key_value.hpp"
#include "bnpmeta/model.hpp"
#include "bnpmeta/random.hpp"

namespace bnpmeta {

/// Which blocks a sweep updates. Disabled blocks keep their current value.
struct UpdateMask {
  bool assignments = true;     // z
  bool probit_latents = true;  // u
  bool probit_coefficients = true;
  bool probit_scale = true;
  bool cluster_means = true;   // mu
  bool regression = true;      // beta
  bool dispersion = true;      // phi
  bool random_effect_variance = true;
  bool recenter = true;        // joint shift of beta_0 against every mu_j
  bool window = true;
};

struct McmcConfig {
  long iterations = 200000;
  long burn_in = 20000;
  long thin = 1;
  std::uint64_t seed = 1;
  int batch_count = 50;
  int chains = 1;
  double tail_mass_tol = 1e-8;
  std::optional<std::pair<int, int>> fixed_window;  // closed window, no adaptation
  int max_window_cells = 10000;
  bool track_log_posterior = true;
  UpdateMask updates;

  void validate() const {
    if (iterations <= 0) throw std::invalid_argument("McmcConfig: iterations must be positive");
    if (burn_in < 0 || burn_in >= iterations)
      throw std::invalid_argument("McmcConfig: burn_in must lie in [0, iterations)");
    if (thin < 1) throw std::invalid_argument("McmcConfig: thin must be >= 1");
    if (batch_count < 1) throw std::invalid_argument("McmcConfig: batch_count must be >= 1");
    if (chains < 1) throw std::invalid_argument("McmcConfig: chains must be >= 1");
    if (!(tail_mass_tol > 0.0 && tail_mass_tol < 1.0))
      throw std::invalid_argument("McmcConfig: tail_mass_tol must lie in (0, 1)");
    if (fixed_window && (fixed_window->first > 0 || fixed_window->second < 0 ||
                         fixed_window->first > fixed_window->second))
      throw std::invalid_argument("McmcConfig: fixed window must contain 0");
  }

  long retained() const { return (iterations - burn_in + thin - 1) / thin; }
};

inline McmcConfig apply_mcmc_keys(const KeyValues& kv, McmcConfig base = {}) {
  base.iterations = key_value_integer(kv, "iterations", base.iterations);
  base.burn_in = key_value_integer(kv, "burn_in", base.burn_in);
  base.thin = key_value_integer(kv, "thin", base.thin);
  base.seed = static_cast<std::uint64_t>(key_value_integer(kv, "seed", static_cast<long>(base.seed)));
  base.batch_count = static_cast<int>(key_value_integer(kv, "batch_count", base.batch_count));
  base.chains = static_cast<int>(key_value_integer(kv, "chains", base.chains));
  base.tail_mass_tol = key_value_double(kv, "tail_mass_tol", base.tail_mass_tol);
  base.max_window_cells = static_cast<int>(key_value_integer(kv, "max_window_cells", base.max_window_cells));
  if (kv.count("window_min") || kv.count("window_max"))
    base.fixed_window = std::pair<int, int>{static_cast<int>(key_value_integer(kv, "window_min", 0)),
                                            static_cast<int>(key_value_integer(kv, "window_max", 0))};
  base.validate();
  return base;
}

/// Model state plus the augmentation: cell index z_i and latent probit u_i
/// for every observation, with u_i inside the cell of z_i.
struct AugmentedState {
  ModelState base;
  std::vector<int> z;
  Eigen::VectorXd u;
};

/// A retained draw.
struct Draw {
  int chain = 0;
  long iteration = 0;
  ModelState state;
  bool closed_window = false;
  /// Observations assigned to each cell of state.mu; empty when unknown.
  std::vector<int> occupancy;
  double log_posterior = kNaN;
};

struct WindowStats {
  int j_min = 0;
  int j_max = 0;
  long changes = 0;
};

struct Chain {
  std::vector<Draw> draws;  // ordered by chain index, then iteration
  McmcConfig config;
  PriorConfig prior;
  std::vector<WindowStats> windows;  // per chain: widest range used, number of changes
  Eigen::Index coefficients = 0;

  bool empty() const { return draws.empty(); }
  std::size_t size() const { return draws.size(); }
};

/// Thrown when the sampler cannot continue; carries a JSON-ish dump of the
/// offending state.
class SamplerError : public std::runtime_error {
 public:
  SamplerError(const std::string& what, std::string dump) : std::runtime_error(what), dump_(std::move(dump)) {}
  const std::string& state_dump() const { return dump_; }

 private:
  std::string dump_;
};

inline std::string dump_state(const AugmentedState& s, long iteration) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json j;
  j["iteration"] = iteration;
  j["phi"] = s.base.phi;
  j["sigma_mu2"] = s.base.sigma_mu2;
  j["sigma_omega"] = s.base.sigma_omega;
  j["beta"] = vec(s.base.beta);
  j["beta_omega"] = vec(s.base.beta_omega);
  j["mu_j_min"] = s.base.mu.j_min();
  j["mu"] = std::vector<double>(s.base.mu.values().begin(), s.base.mu.values().end());
  j["z"] = s.z;
  // non-finite values are what usually triggers a dump; keep them readable
  return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace);
}

class GibbsSampler {
 public:
  GibbsSampler(const Design& design, const PriorConfig& prior, const McmcConfig& cfg, Rng rng)
      : design_(design), prior_(prior), cfg_(cfg), rng_(std::move(rng)) {
    design_.validate();
    prior_.validate();
    cfg_.validate();
    const auto& x = design_.x;
    inv_var_ = design_.var.cwiseInverse();
    xtx_ = x.transpose() * x;
    xt_vinv_x_ = x.transpose() * inv_var_.asDiagonal() * x;
    prior_precision_ = Eigen::VectorXd::Constant(x.cols(), 1.0 / prior_.slope_var);
    prior_precision_[0] = 1.0 / prior_.beta0_var;
    eta_.resize(design_.size());
    fit_.resize(design_.size());
  }

  /// Starting values: beta_0 at the inverse-variance mean of y, zero slopes,
  /// phi = 1, standard-normal probit, mu_j drawn from their prior.
  void initialize(const std::optional<ModelState>& init = std::nullopt) {
    const auto n = design_.size();
    const auto p = design_.coefficients();
    AugmentedState s;
    if (init) {
      s.base = *init;
      if (s.base.beta.size() != p || s.base.beta_omega.size() != p)
        throw std::invalid_argument("initial state has the wrong number of coefficients");
    } else {
      s.base = ModelState::zeros(p);
      const double wsum = inv_var_.sum();
      const double ybar = design_.y.dot(inv_var_) / wsum;
      s.base.beta[0] = ybar;
      s.base.phi = 1.0;
      s.base.sigma_omega = 1.0;
      if (prior_.mu_prior == MuPrior::hierarchical) {
        const double spread = (design_.y.array() - ybar).square().mean();
        s.base.sigma_mu2 = std::min(spread + 1e-3, 0.5 * prior_.sigma_mu2_upper);
      }
    }
    if (prior_.mu_prior == MuPrior::fixed) s.base.sigma_mu2 = prior_.mu_fixed_var;

    int lo = 0, hi = 0;
    if (cfg_.fixed_window) {
      std::tie(lo, hi) = *cfg_.fixed_window;
    } else if (!init) {
      refresh_eta(s.base);
      std::tie(lo, hi) = required_window(std::span<const double>(eta_.data(), eta_.size()), s.base.sigma_omega,
                                         cfg_.tail_mass_tol);
    } else {
      lo = s.base.mu.j_min();
      hi = s.base.mu.j_max();
    }
    const double sd = std::sqrt(s.base.sigma_mu2);
    if (init)
      s.base.mu.reindex(lo, hi, [&](int) { return rng_.normal(0.0, sd); });
    else
      s.base.mu = ClusterMeans(lo, [&] {
        std::vector<double> v(static_cast<std::size_t>(hi - lo + 1));
        for (auto& m : v) m = rng_.normal(0.0, sd);
        return v;
      }());

    s.z.assign(static_cast<std::size_t>(n), std::clamp(0, lo, hi));
    s.u = Eigen::VectorXd::Constant(n, -0.5);
    state_ = std::move(s);
    const auto w = window();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto [a, b] = cell_bounds(state_.z[static_cast<std::size_t>(i)], w);
      state_.u[i] = std::isfinite(a) ? (std::isfinite(b) ? 0.5 * (a + b) : a + 0.5) : b - 0.5;
    }
    initialized_ = true;
  }

  const AugmentedState& state() const { return state_; }
  void set_state(AugmentedState s) {
    state_ = std::move(s);
    initialized_ = true;
  }
  const PriorConfig& prior() const { return prior_; }
  const McmcConfig& config() const { return cfg_; }
  Rng& rng() { return rng_; }

  WeightWindow window() const { return WeightWindow::of(state_.base, cfg_.tail_mass_tol, cfg_.fixed_window.has_value()); }

  std::vector<int> occupancy() const {
    std::vector<int> counts(state_.base.mu.size(), 0);
    for (int z : state_.z) ++counts[static_cast<std::size_t>(z - state_.base.mu.j_min())];
    return counts;
  }

  /// One full sweep over the enabled blocks, in the fixed order
  /// z, u, beta_w, sigma_w, mu, beta, phi, sigma_mu2, recenter, window.
  void sweep() {
    if (!initialized_) initialize();
    const auto& m = cfg_.updates;
    if (m.assignments) update_assignments();
    if (m.probit_latents) update_probit_latents();
    if (m.probit_coefficients) update_probit_coefficients();
    if (m.probit_scale) update_probit_scale();
    if (m.cluster_means) update_cluster_means();
    if (m.regression) update_regression();
    if (m.dispersion) update_dispersion();
    if (m.random_effect_variance && prior_.mu_prior == MuPrior::hierarchical) update_random_effect_variance();
    if (m.recenter && m.cluster_means && m.regression) recenter();
    if (m.window) adapt_window();
    ++iteration_;
    check_finite();
  }

  /// z_i | rest, with u_i integrated out: P(z_i = j) is proportional to
  /// w_j(x_i) n(y_i | x_i'beta + mu_j, phi var_i) over the window.
  void update_assignments() {
    auto& s = state_.base;
    refresh_eta(s);
    refresh_fit(s);
    const auto w = window();
    std::vector<double> logp(static_cast<std::size_t>(w.cells()));
    for (Eigen::Index i = 0; i < design_.size(); ++i) {
      const double v = s.phi * design_.var[i];
      for (int j = w.j_min; j <= w.j_max; ++j)
        logp[static_cast<std::size_t>(j - w.j_min)] =
            log_cell_weight(j, eta_[i], s.sigma_omega, w) + normal_log_pdf(design_.y[i], fit_[i] + s.mu[j], v);
      const double total = log_sum_exp(logp);
      if (!std::isfinite(total))
        throw SamplerError("no window cell can hold observation " + std::to_string(i), dump_state(state_, iteration_));
      double target = rng_.uniform() * 1.0;
      int chosen = w.j_max;
      for (int j = w.j_min; j <= w.j_max; ++j) {
        target -= std::exp(logp[static_cast<std::size_t>(j - w.j_min)] - total);
        if (target < 0.0) {
          chosen = j;
          break;
        }
      }
      state_.z[static_cast<std::size_t>(i)] = chosen;
    }
  }

  /// u_i | z_i ~ N(x_i'beta_w, sigma_w^2) truncated to the cell of z_i.
  void update_probit_latents() {
    const auto& s = state_.base;
    refresh_eta(s);
    const auto w = window();
    for (Eigen::Index i = 0; i < design_.size(); ++i) {
      const auto [a, b] = cell_bounds(state_.z[static_cast<std::size_t>(i)], w);
      const double e = truncated_standard_normal((a - eta_[i]) / s.sigma_omega, (b - eta_[i]) / s.sigma_omega, rng_);
      state_.u[i] = std::clamp(eta_[i] + s.sigma_omega * e, a, b);
    }
  }

  /// beta_w | u, sigma_w: Bayesian linear regression of u on x.
  void update_probit_coefficients() {
    auto& s = state_.base;
    const double tau = 1.0 / (s.sigma_omega * s.sigma_omega);
    Eigen::MatrixXd precision = tau * xtx_;
    precision.diagonal().array() += 1.0 / prior_.beta_omega_var;
    const Eigen::VectorXd rhs = tau * (design_.x.transpose() * state_.u);
    s.beta_omega = draw_gaussian(precision, rhs);
  }

  /// sigma_w | u, beta_w.
  void update_probit_scale() {
    auto& s = state_.base;
    const double rss = (state_.u - design_.x * s.beta_omega).squaredNorm();
    const double n = static_cast<double>(design_.size());
    const double a = prior_.sigma_omega_prec_shape;
    const double b = prior_.sigma_omega_prec_rate;
    if (prior_.sigma_omega_prior == SigmaOmegaPrior::precision) {
      const double tau = rng_.gamma(a + 0.5 * n, b + 0.5 * rss);
      s.sigma_omega = 1.0 / std::sqrt(tau);
    } else {
      // log-density of t = log sigma_w^2 (Jacobian included)
      auto logf = [&](double t) { return (a - 0.5 * n) * t - b * std::exp(t) - 0.5 * rss * std::exp(-t); };
      const double t = slice_sample(2.0 * std::log(s.sigma_omega), logf, 1.0, rng_);
      s.sigma_omega = std::exp(0.5 * t);
    }
  }

  /// mu_j | rest: conjugate normal given the observations assigned to j.
  void update_cluster_means() {
    auto& s = state_.base;
    refresh_fit(s);
    const int lo = s.mu.j_min();
    std::vector<double> precision(s.mu.size(), 1.0 / s.sigma_mu2);
    std::vector<double> weighted(s.mu.size(), 0.0);
    for (Eigen::Index i = 0; i < design_.size(); ++i) {
      const auto k = static_cast<std::size_t>(state_.z[static_cast<std::size_t>(i)] - lo);
      const double w = inv_var_[i] / s.phi;
      precision[k] += w;
      weighted[k] += w * (design_.y[i] - fit_[i]);
    }
    for (int j = lo; j <= s.mu.j_max(); ++j) {
      const auto k = static_cast<std::size_t>(j - lo);
      s.mu[j] = rng_.normal(weighted[k] / precision[k], 1.0 / std::sqrt(precision[k]));
    }
  }

  /// beta | rest: weighted regression of y_i - mu_{z_i} with precisions 1/(phi var_i).
  void update_regression() {
    auto& s = state_.base;
    Eigen::VectorXd r(design_.size());
    for (Eigen::Index i = 0; i < design_.size(); ++i)
      r[i] = (design_.y[i] - s.mu[state_.z[static_cast<std::size_t>(i)]]) * inv_var_[i];
    Eigen::MatrixXd precision = xt_vinv_x_ / s.phi;
    precision.diagonal() += prior_precision_;
    const Eigen::VectorXd rhs = design_.x.transpose() * r / s.phi;
    s.beta = draw_gaussian(precision, rhs);
  }

  /// phi | rest. The Gamma prior sits on a variance multiplier, so the full
  /// conditional is generalized inverse Gaussian; sampled by slice on log phi.
  void update_dispersion() {
    auto& s = state_.base;
    refresh_fit(s);
    double ss = 0.0;
    for (Eigen::Index i = 0; i < design_.size(); ++i) {
      const double e = design_.y[i] - fit_[i] - s.mu[state_.z[static_cast<std::size_t>(i)]];
      ss += e * e * inv_var_[i];
    }
    const double shape = prior_.phi_shape - 0.5 * static_cast<double>(design_.size());
    const double rate = prior_.phi_rate;
    auto logf = [&](double t) { return shape * t - rate * std::exp(t) - 0.5 * ss * std::exp(-t); };
    s.phi = std::exp(slice_sample(std::log(s.phi), logf, 1.0, rng_));
  }

  /// sigma_mu2 | mu on (0, upper), slice sampled on the log scale.
  void update_random_effect_variance() {
    auto& s = state_.base;
    double q = 0.0;
    for (double m : s.mu.values()) q += m * m;
    const double cells = static_cast<double>(s.mu.size());
    const double log_upper = std::log(prior_.sigma_mu2_upper);
    auto logf = [&](double t) {
      if (t >= log_upper) return -kInf;
      return (1.0 - 0.5 * cells) * t - 0.5 * q * std::exp(-t);
    };
    s.sigma_mu2 = std::exp(slice_sample(std::log(s.sigma_mu2), logf, 1.0, rng_, -kInf, log_upper));
  }

  /// Draws a shift d from its full conditional and moves beta_0 -> beta_0 + d,
  /// mu_j -> mu_j - d. The likelihood is invariant, so only the two priors
  /// enter; this removes the slow ridge between the intercept and the
  /// random effects.
  void recenter() {
    auto& s = state_.base;
    const double cells = static_cast<double>(s.mu.size());
    double mu_sum = 0.0;
    for (double m : s.mu.values()) mu_sum += m;
    const double precision = 1.0 / prior_.beta0_var + cells / s.sigma_mu2;
    const double mean = (-s.beta[0] / prior_.beta0_var + mu_sum / s.sigma_mu2) / precision;
    const double d = rng_.normal(mean, 1.0 / std::sqrt(precision));
    s.beta[0] += d;
    for (int j = s.mu.j_min(); j <= s.mu.j_max(); ++j) s.mu[j] -= d;
  }

  /// Resizes an open window to cover every observed x to the tail tolerance,
  /// keep every occupied cell and contain 0. New mu_j come from their prior.
  void adapt_window() {
    if (cfg_.fixed_window) return;
    auto& s = state_.base;
    refresh_eta(s);
    auto [lo, hi] = required_window(std::span<const double>(eta_.data(), eta_.size()), s.sigma_omega, cfg_.tail_mass_tol);
    for (int z : state_.z) {
      lo = std::min(lo, z);
      hi = std::max(hi, z);
    }
    if (hi - lo + 1 > cfg_.max_window_cells)
      throw SamplerError("window of " + std::to_string(hi - lo + 1) + " cells exceeds max_window_cells",
                         dump_state(state_, iteration_));
    if (lo != s.mu.j_min() || hi != s.mu.j_max()) {
      const double sd = std::sqrt(s.sigma_mu2);
      s.mu.reindex(lo, hi, [&](int) { return rng_.normal(0.0, sd); });
      ++window_changes_;
    }
    widest_lo_ = std::min(widest_lo_, lo);
    widest_hi_ = std::max(widest_hi_, hi);
  }

  long iteration() const { return iteration_; }
  WindowStats window_stats() const {
    return {std::min(widest_lo_, state_.base.mu.j_min()), std::max(widest_hi_, state_.base.mu.j_max()), window_changes_};
  }

 private:
  void refresh_eta(const ModelState& s) { eta_.noalias() = design_.x * s.beta_omega; }
  void refresh_fit(const ModelState& s) { fit_.noalias() = design_.x * s.beta; }

  Eigen::VectorXd draw_gaussian(const Eigen::MatrixXd& precision, const Eigen::VectorXd& rhs) {
    const Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success)
      throw SamplerError("posterior precision matrix is not positive definite", dump_state(state_, iteration_));
    Eigen::VectorXd eps(rhs.size());
    for (Eigen::Index k = 0; k < eps.size(); ++k) eps[k] = rng_.normal();
    return llt.solve(rhs) + llt.matrixU().solve(eps);
  }

  void check_finite() const {
    const auto& s = state_.base;
    const bool ok = std::isfinite(s.phi) && s.phi > 0.0 && std::isfinite(s.sigma_omega) && s.sigma_omega > 0.0 &&
                    std::isfinite(s.sigma_mu2) && s.sigma_mu2 > 0.0 && s.beta.allFinite() && s.beta_omega.allFinite() &&
                    std::all_of(s.mu.values().begin(), s.mu.values().end(), [](double m) { return std::isfinite(m); });
    if (!ok) throw SamplerError("non-finite parameter after sweep", dump_state(state_, iteration_));
  }

  const Design& design_;
  PriorConfig prior_;
  McmcConfig cfg_;
  Rng rng_;
  AugmentedState state_;
  bool initialized_ = false;
  long iteration_ = 0;
  long window_changes_ = 0;
  int widest_lo_ = 0;
  int widest_hi_ = 0;

  Eigen::VectorXd inv_var_;
  Eigen::MatrixXd xtx_;
  Eigen::MatrixXd xt_vinv_x_;
  Eigen::VectorXd prior_precision_;
  Eigen::VectorXd eta_;
  Eigen::VectorXd fit_;
};

namespace detail {

inline std::vector<Draw> run_single_chain(const Design& design, const PriorConfig& prior, const McmcConfig& cfg,
                                          int chain_index, const std::optional<ModelState>& init, WindowStats& stats) {
  GibbsSampler sampler(design, prior, cfg, Rng(cfg.seed, static_cast<std::uint64_t>(chain_index)));
  sampler.initialize(init);
  std::vector<Draw> draws;
  draws.reserve(static_cast<std::size_t>(cfg.retained()));
  const bool closed = cfg.fixed_window.has_value();
  const bool track_occupancy = cfg.updates.cluster_means;
  for (long t = 1; t <= cfg.iterations; ++t) {
    sampler.sweep();
    if (t <= cfg.burn_in || (t - cfg.burn_in - 1) % cfg.thin != 0) continue;
    Draw d;
    d.chain = chain_index;
    d.iteration = t;
    d.state = sampler.state().base;
    d.closed_window = closed;
    if (track_occupancy) d.occupancy = sampler.occupancy();
    if (cfg.track_log_posterior) {
      d.log_posterior = log_posterior_kernel(design, d.state, prior, sampler.window());
      if (!std::isfinite(d.log_posterior))
        throw SamplerError("non-finite log posterior at iteration " + std::to_string(t),
                           dump_state(sampler.state(), t));
    }
    draws.push_back(std::move(d));
  }
  stats = sampler.window_stats();
  return draws;
}

}  // namespace detail

/// Runs cfg.chains independent chains (concurrently when more than one) and
/// returns their retained draws merged in chain order. Chain k uses RNG
/// stream k of cfg.seed, so results do not depend on thread scheduling.
inline Chain run_chain(const Design& design, const PriorConfig& prior, const McmcConfig& cfg,
                       const std::optional<ModelState>& init = std::nullopt) {
  design.validate();
  prior.validate();
  cfg.validate();
  if (design.size() == 0) throw std::invalid_argument("run_chain: empty dataset");

  const auto k = static_cast<std::size_t>(cfg.chains);
  std::vector<std::vector<Draw>> per_chain(k);
  std::vector<WindowStats> stats(k);
  std::vector<std::exception_ptr> errors(k);
  auto work = [&](std::size_t c) {
    try {
      per_chain[c] = detail::run_single_chain(design, prior, cfg, static_cast<int>(c), init, stats[c]);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (k == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t c = 0; c < k; ++c) threads.emplace_back(work, c);
    for (auto& t : threads) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  Chain out;
  out.config = cfg;
  out.prior = prior;
  out.windows = stats;
  out.coefficients = design.coefficients();
  for (auto& draws : per_chain)
    for (auto& d : draws) out.draws.push_back(std::move(d));
  return out;
}

inline Chain run_chain(const StandardizedDataset& data, const PriorConfig& prior, const McmcConfig& cfg,
                       const std::optional<ModelState>& init = std::nullopt) {
  return run_chain(data.design(), prior, cfg, init);
}

struct BatchMeans {
  double mean = 0.0;
  double half_width = 0.0;
};

/// Batch-means 95% Monte Carlo interval for the mean of a (correlated)
/// series: b equal contiguous batches; half width t_{.975, b-1} sd(batch means) / sqrt(b).
/// Leading draws that do not fill a whole batch are dropped.
inline BatchMeans batch_means_ci(std::span<const double> series, int batch_count) {
  if (batch_count < 2) throw std::invalid_argument("batch_means_ci: need at least 2 batches");
  if (series.size() < 2 * static_cast<std::size_t>(batch_count))
    throw std::invalid_argument("batch_means_ci: series shorter than two draws per batch");
  const std::size_t b = static_cast<std::size_t>(batch_count);
  const std::size_t size = series.size() / b;
  const std::size_t offset = series.size() - size * b;
  std::vector<double> means(b, 0.0);
  for (std::size_t k = 0; k < b; ++k) {
    double acc = 0.0;
    for (std::size_t t = 0; t < size; ++t) acc += series[offset + k * size + t];
    means[k] = acc / static_cast<double>(size);
  }
  const auto [grand, sd] = detail::mean_sd(means);
  const double t = student_t_quantile(0.975, static_cast<double>(b - 1));
  return {grand, t * sd / std::sqrt(static_cast<double>(b))};
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
inline double sorted_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) return kNaN;
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return sorted_quantile(values, p);
}

/// Scalar parameters of a draw, in a fixed order.
inline std::vector<std::string> scalar_parameter_names(Eigen::Index coefficients) {
  std::vector<std::string> names;
  for (Eigen::Index k = 0; k < coefficients; ++k) names.push_back("beta[" + std::to_string(k) + "]");
  names.push_back("phi");
  names.push_back("sigma_mu2");
  for (Eigen::Index k = 0; k < coefficients; ++k) names.push_back("beta_omega[" + std::to_string(k) + "]");
  names.push_back("sigma_omega");
  return names;
}

inline std::vector<double> scalar_parameters(const ModelState& s) {
  std::vector<double> out(s.beta.data(), s.beta.data() + s.beta.size());
  out.push_back(s.phi);
  out.push_back(s.sigma_mu2);
  out.insert(out.end(), s.beta_omega.data(), s.beta_omega.data() + s.beta_omega.size());
  out.push_back(s.sigma_omega);
  return out;
}

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double mc_half_width = kNaN;  // batch-means 95% half width; NaN if too few draws
  double rhat = kNaN;           // potential scale reduction; NaN with one chain
  std::vector<double> trace;    // down-sampled series
};

struct ChainSummary {
  std::size_t draws = 0;
  int chains = 0;
  std::vector<ParameterSummary> parameters;

  const ParameterSummary* find(std::string_view name) const {
    for (const auto& p : parameters)
      if (p.name == name) return &p;
    return nullptr;
  }
};

/// Gelman-Rubin potential scale reduction over equal-length chains.
inline double potential_scale_reduction(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) return kNaN;
  std::size_t n = chains.front().size();
  for (const auto& c : chains) n = std::min(n, c.size());
  if (n < 2) return kNaN;
  const double m = static_cast<double>(chains.size());
  const double nn = static_cast<double>(n);
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    const auto [mu, sd] = detail::mean_sd(std::span<const double>(c.data(), n));
    means.push_back(mu);
    vars.push_back(sd * sd);
  }
  const auto [grand, between_sd] = detail::mean_sd(means);
  (void)grand;
  const double between = nn * between_sd * between_sd;
  double within = 0.0;
  for (double v : vars) within += v / m;
  if (!(within > 0.0)) return kNaN;
  const double pooled = (nn - 1.0) / nn * within + between / nn;
  return std::sqrt(pooled / within);
}

inline ChainSummary summarize_chain(const Chain& chain, int batch_count, std::size_t trace_points = 200) {
  ChainSummary out;
  out.draws = chain.size();
  out.chains = chain.config.chains;
  if (chain.empty()) return out;
  const auto names = scalar_parameter_names(chain.coefficients);
  std::vector<std::vector<double>> series(names.size());
  for (const auto& d : chain.draws) {
    const auto v = scalar_parameters(d.state);
    for (std::size_t k = 0; k < names.size(); ++k) series[k].push_back(v[k]);
  }
  for (std::size_t k = 0; k < names.size(); ++k) {
    ParameterSummary ps;
    ps.name = names[k];
    const auto& s = series[k];
    const auto [mean, sd] = detail::mean_sd(s);
    ps.mean = mean;
    ps.sd = sd;
    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    ps.q025 = sorted_quantile(sorted, 0.025);
    ps.q975 = sorted_quantile(sorted, 0.975);
    if (batch_count >= 2 && s.size() >= 2 * static_cast<std::size_t>(batch_count))
      ps.mc_half_width = batch_means_ci(s, batch_count).half_width;
    const std::size_t stride = std::max<std::size_t>(1, s.size() / std::max<std::size_t>(1, trace_points));
    for (std::size_t t = 0; t < s.size(); t += stride) ps.trace.push_back(s[t]);
    if (chain.config.chains > 1) {
      std::vector<std::vector<double>> by_chain(static_cast<std::size_t>(chain.config.chains));
      for (std::size_t t = 0; t < chain.draws.size(); ++t)
        by_chain[static_cast<std::size_t>(chain.draws[t].chain)].push_back(s[t]);
      ps.rhat = potential_scale_reduction(by_chain);
    }
    out.parameters.push_back(std::move(ps));
  }
  return out;
}

}  // namespace bnpmeta
