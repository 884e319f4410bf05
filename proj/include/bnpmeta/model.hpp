#pragma once

// Covariate-dependent infinite normal mixture for meta-regression.
//
//   f(y | x) = sum_j n(y | x'beta + mu_j, phi * var) * w_j(x)
//   w_j(x)   = Phi((j - x'beta_w) / sigma_w) - Phi((j - 1 - x'beta_w) / sigma_w)
//
// for j = 0, +-1, +-2, ... The weights are the cell probabilities of a latent
// u ~ N(x'beta_w, sigma_w^2) falling in (j - 1, j]. Only a finite window of j
// is materialized; see WeightWindow.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bnpmeta/csv.hpp"
#include "bnpmeta/design.hpp"
#include "bnpmeta/distributions.hpp"
#include "bnpmeta/key_value.hpp"

namespace bnpmeta {

/// Prior on the random effects mu_j.
enum class MuPrior {
  hierarchical,  // mu_j ~ N(0, sigma_mu2), sigma_mu2 ~ U(0, sigma_mu2_upper)
  fixed,         // mu_j ~ N(0, mu_fixed_var); sigma_mu2 held at mu_fixed_var
};

/// Which quantity of the probit scale carries the Gamma prior.
enum class SigmaOmegaPrior {
  precision,  // sigma_w^-2 ~ Gamma(shape, rate)
  variance,   // sigma_w^2 ~ Gamma(shape, rate)
};

/// Hyperparameters. Gamma densities use shape-rate.
struct PriorConfig {
  double beta0_var = 1e5;
  double slope_var = 1.0;
  double phi_shape = 0.5;
  double phi_rate = 0.5;
  double sigma_mu2_upper = 100.0;
  double beta_omega_var = 1e5;
  double sigma_omega_prec_shape = 1.0;
  double sigma_omega_prec_rate = 1.0;
  MuPrior mu_prior = MuPrior::hierarchical;
  double mu_fixed_var = 0.5;
  SigmaOmegaPrior sigma_omega_prior = SigmaOmegaPrior::precision;

  void validate() const {
    const double values[] = {beta0_var,      slope_var,   phi_shape,
                             phi_rate,       sigma_mu2_upper, beta_omega_var,
                             sigma_omega_prec_shape, sigma_omega_prec_rate, mu_fixed_var};
    for (double v : values)
      if (!(v > 0.0) || !std::isfinite(v))
        throw std::invalid_argument("PriorConfig: hyperparameters must be positive and finite");
  }

  friend bool operator==(const PriorConfig&, const PriorConfig&) = default;
};

inline const char* to_string(MuPrior p) { return p == MuPrior::hierarchical ? "hierarchical" : "fixed"; }
inline const char* to_string(SigmaOmegaPrior p) {
  return p == SigmaOmegaPrior::precision ? "precision" : "variance";
}

/// Applies recognized prior keys from `kv` on top of `base`.
inline PriorConfig apply_prior_keys(const KeyValues& kv, PriorConfig base = {}) {
  base.beta0_var = key_value_double(kv, "beta0_var", base.beta0_var);
  base.slope_var = key_value_double(kv, "slope_var", base.slope_var);
  base.phi_shape = key_value_double(kv, "phi_shape", base.phi_shape);
  base.phi_rate = key_value_double(kv, "phi_rate", base.phi_rate);
  base.sigma_mu2_upper = key_value_double(kv, "sigma_mu2_upper", base.sigma_mu2_upper);
  base.beta_omega_var = key_value_double(kv, "beta_omega_var", base.beta_omega_var);
  base.sigma_omega_prec_shape = key_value_double(kv, "sigma_omega_prec_shape", base.sigma_omega_prec_shape);
  base.sigma_omega_prec_rate = key_value_double(kv, "sigma_omega_prec_rate", base.sigma_omega_prec_rate);
  base.mu_fixed_var = key_value_double(kv, "mu_fixed_var", base.mu_fixed_var);
  if (auto it = kv.find("mu_prior"); it != kv.end()) {
    if (it->second == "hierarchical")
      base.mu_prior = MuPrior::hierarchical;
    else if (it->second == "fixed")
      base.mu_prior = MuPrior::fixed;
    else
      throw std::invalid_argument("mu_prior must be 'hierarchical' or 'fixed'");
  }
  if (auto it = kv.find("sigma_omega_prior"); it != kv.end()) {
    if (it->second == "precision")
      base.sigma_omega_prior = SigmaOmegaPrior::precision;
    else if (it->second == "variance")
      base.sigma_omega_prior = SigmaOmegaPrior::variance;
    else
      throw std::invalid_argument("sigma_omega_prior must be 'precision' or 'variance'");
  }
  base.validate();
  return base;
}

inline std::string to_key_value(const PriorConfig& p) {
  std::ostringstream out;
  auto line = [&](const char* key, double v) { out << key << " = " << csv::format_double(v) << '\n'; };
  line("beta0_var", p.beta0_var);
  line("slope_var", p.slope_var);
  line("phi_shape", p.phi_shape);
  line("phi_rate", p.phi_rate);
  line("sigma_mu2_upper", p.sigma_mu2_upper);
  line("beta_omega_var", p.beta_omega_var);
  line("sigma_omega_prec_shape", p.sigma_omega_prec_shape);
  line("sigma_omega_prec_rate", p.sigma_omega_prec_rate);
  out << "mu_prior = " << to_string(p.mu_prior) << '\n';
  line("mu_fixed_var", p.mu_fixed_var);
  out << "sigma_omega_prior = " << to_string(p.sigma_omega_prior) << '\n';
  return out.str();
}

inline PriorConfig read_prior_config(const std::filesystem::path& path) {
  return apply_prior_keys(read_key_values(path));
}

inline void write_prior_config(const std::filesystem::path& path, const PriorConfig& p) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_key_value(p);
}

/// Random-effect values mu_j over a contiguous index range that contains 0.
class ClusterMeans {
 public:
  ClusterMeans() : j_min_(0), values_{0.0} {}

  ClusterMeans(int j_min, std::vector<double> values) : j_min_(j_min), values_(std::move(values)) {
    if (values_.empty() || j_min_ > 0 || j_max() < 0)
      throw std::invalid_argument("ClusterMeans: index range must contain 0");
  }

  int j_min() const { return j_min_; }
  int j_max() const { return j_min_ + static_cast<int>(values_.size()) - 1; }
  std::size_t size() const { return values_.size(); }
  bool contains(int j) const { return j >= j_min_ && j <= j_max(); }

  double operator[](int j) const { return values_[static_cast<std::size_t>(j - j_min_)]; }
  double& operator[](int j) { return values_[static_cast<std::size_t>(j - j_min_)]; }

  std::span<const double> values() const { return values_; }

  /// Re-index to [lo, hi]; cells new to the range are filled with fill(j).
  template <class Fill>
  void reindex(int lo, int hi, Fill&& fill) {
    if (lo > 0 || hi < 0 || lo > hi) throw std::invalid_argument("ClusterMeans: range must contain 0");
    std::vector<double> next(static_cast<std::size_t>(hi - lo + 1));
    for (int j = lo; j <= hi; ++j)
      next[static_cast<std::size_t>(j - lo)] = contains(j) ? (*this)[j] : fill(j);
    j_min_ = lo;
    values_ = std::move(next);
  }

  friend bool operator==(const ClusterMeans&, const ClusterMeans&) = default;

 private:
  int j_min_;
  std::vector<double> values_;
};

/// One full parameter configuration (mu, beta, phi, sigma_mu2, beta_w, sigma_w).
struct ModelState {
  ClusterMeans mu;
  Eigen::VectorXd beta;        // intercept then slopes
  double phi = 1.0;            // dispersion multiplier on the sampling variances
  double sigma_mu2 = 1.0;      // random-effect variance
  Eigen::VectorXd beta_omega;  // ordered-probit coefficients
  double sigma_omega = 1.0;    // ordered-probit scale

  static ModelState zeros(Eigen::Index coefficients) {
    ModelState s;
    s.beta = Eigen::VectorXd::Zero(coefficients);
    s.beta_omega = Eigen::VectorXd::Zero(coefficients);
    return s;
  }
};

/// The materialized range of mixture indices.
///
/// An open window is a truncation of the infinite mixture: mass outside it is
/// below tail_mass_tol at every observed x. A closed window is a finite
/// ordered-probit model in its own right: its end cells extend to -inf and
/// +inf so the weights sum to one exactly.
struct WeightWindow {
  int j_min = 0;
  int j_max = 0;
  double tail_mass_tol = 1e-8;
  bool closed = false;

  int cells() const { return j_max - j_min + 1; }
  bool contains(int j) const { return j >= j_min && j <= j_max; }

  static WeightWindow of(const ModelState& s, double tol, bool closed) {
    return {s.mu.j_min(), s.mu.j_max(), tol, closed};
  }
};

/// Ordered-probit cell probability w_j for linear predictor `eta`.
inline double mixture_weight(int j, double eta, double sigma_omega) {
  if (std::isnan(eta) || std::isnan(sigma_omega)) throw std::domain_error("mixture_weight: NaN input");
  if (!(sigma_omega > 0.0)) throw std::domain_error("mixture_weight: sigma_omega must be positive");
  return std::exp(log_normal_interval((j - 1 - eta) / sigma_omega, (j - eta) / sigma_omega));
}

inline double mixture_weight(int j, const Eigen::VectorXd& x, const Eigen::VectorXd& beta_omega,
                             double sigma_omega) {
  return mixture_weight(j, x.dot(beta_omega), sigma_omega);
}

/// Latent-probit interval that selects cell j under `window`.
inline std::pair<double, double> cell_bounds(int j, const WeightWindow& window) {
  const double lo = (window.closed && j == window.j_min) ? -kInf : static_cast<double>(j - 1);
  const double hi = (window.closed && j == window.j_max) ? kInf : static_cast<double>(j);
  return {lo, hi};
}

inline double log_cell_weight(int j, double eta, double sigma_omega, const WeightWindow& window) {
  const auto [lo, hi] = cell_bounds(j, window);
  return log_normal_interval((lo - eta) / sigma_omega, (hi - eta) / sigma_omega);
}

/// Probability mass of the infinite mixture lying outside an open window.
inline double outside_window_mass(double eta, double sigma_omega, const WeightWindow& window) {
  if (window.closed) return 0.0;
  return normal_cdf((window.j_min - 1 - eta) / sigma_omega) + normal_survival((window.j_max - eta) / sigma_omega);
}

/// Smallest index range whose outside mass is at most `tol` for every
/// linear predictor in `etas`.
inline std::pair<int, int> required_window(std::span<const double> etas, double sigma_omega, double tol) {
  const double z = normal_survival_quantile(0.5 * tol);
  int lo = 0, hi = 0;
  for (double eta : etas) {
    lo = std::min(lo, static_cast<int>(std::floor(eta - sigma_omega * z)) + 1);
    hi = std::max(hi, static_cast<int>(std::ceil(eta + sigma_omega * z)));
  }
  return {lo, hi};
}

/// A normal component of a finite mixture.
struct Component {
  double weight = 0.0;
  double mean = 0.0;
  double variance = 1.0;
};

inline double mixture_density(double y, std::span<const Component> components) {
  double acc = 0.0;
  for (const auto& c : components)
    if (c.weight > 0.0) acc += c.weight * normal_pdf(y, c.mean, c.variance);
  return acc;
}

/// log f(y | x; state) under `window`. For an open window the mass outside it
/// is assigned to a fresh random effect integrated against its prior,
/// n(y | x'beta, phi var + sigma_mu2), so the density integrates to one.
inline double log_likelihood_density(double y, double var, const Eigen::VectorXd& x, const ModelState& state,
                                     const WeightWindow& window) {
  if (!(state.phi > 0.0) || !(state.sigma_omega > 0.0)) return -kInf;
  const double mean = x.dot(state.beta);
  const double eta = x.dot(state.beta_omega);
  const double v = state.phi * var;
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(window.cells()) + 1);
  for (int j = window.j_min; j <= window.j_max; ++j)
    terms.push_back(log_cell_weight(j, eta, state.sigma_omega, window) + normal_log_pdf(y, mean + state.mu[j], v));
  const double outside = outside_window_mass(eta, state.sigma_omega, window);
  if (outside > 0.0) terms.push_back(std::log(outside) + normal_log_pdf(y, mean, v + state.sigma_mu2));
  return log_sum_exp(terms);
}

inline double likelihood_density(double y, double var, const Eigen::VectorXd& x, const ModelState& state,
                                 const WeightWindow& window) {
  return std::exp(log_likelihood_density(y, var, x, state, window));
}

/// Log prior split by parameter block.
struct PriorTerms {
  double mu = 0.0;
  double beta = 0.0;
  double phi = 0.0;
  double sigma_mu2 = 0.0;
  double beta_omega = 0.0;
  double sigma_omega = 0.0;

  double total() const { return mu + beta + phi + sigma_mu2 + beta_omega + sigma_omega; }
};

/// The sigma_omega term is the density of sigma_w^-2 (precision prior) or of
/// sigma_w^2 (variance prior), matching the variable the sampler updates.
inline PriorTerms log_prior_terms(const ModelState& s, const PriorConfig& prior) {
  PriorTerms t;
  const double mu_var = prior.mu_prior == MuPrior::hierarchical ? s.sigma_mu2 : prior.mu_fixed_var;
  if (prior.mu_prior == MuPrior::hierarchical) {
    t.sigma_mu2 = (s.sigma_mu2 > 0.0 && s.sigma_mu2 < prior.sigma_mu2_upper) ? -std::log(prior.sigma_mu2_upper) : -kInf;
  }
  if (mu_var > 0.0) {
    for (double m : s.mu.values()) t.mu += normal_log_pdf(m, 0.0, mu_var);
  } else {
    t.mu = -kInf;
  }
  for (Eigen::Index k = 0; k < s.beta.size(); ++k)
    t.beta += normal_log_pdf(s.beta[k], 0.0, k == 0 ? prior.beta0_var : prior.slope_var);
  t.phi = gamma_log_pdf(s.phi, prior.phi_shape, prior.phi_rate);
  for (Eigen::Index k = 0; k < s.beta_omega.size(); ++k)
    t.beta_omega += normal_log_pdf(s.beta_omega[k], 0.0, prior.beta_omega_var);
  if (!(s.sigma_omega > 0.0)) {
    t.sigma_omega = -kInf;
  } else {
    const double s2 = s.sigma_omega * s.sigma_omega;
    t.sigma_omega = prior.sigma_omega_prior == SigmaOmegaPrior::precision
                        ? gamma_log_pdf(1.0 / s2, prior.sigma_omega_prec_shape, prior.sigma_omega_prec_rate)
                        : gamma_log_pdf(s2, prior.sigma_omega_prec_shape, prior.sigma_omega_prec_rate);
  }
  return t;
}

inline double log_prior(const ModelState& s, const PriorConfig& prior) { return log_prior_terms(s, prior).total(); }

/// Unnormalized log posterior: sum_i log f(y_i | x_i) + log prior.
inline double log_posterior_kernel(const Design& d, const ModelState& s, const PriorConfig& prior,
                                   const WeightWindow& window) {
  const double lp = log_prior(s, prior);
  if (lp == -kInf || std::isnan(lp)) return -kInf;
  double acc = lp;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    acc += log_likelihood_density(d.y[i], d.var[i], d.x.row(i).transpose(), s, window);
    if (acc == -kInf) return acc;
  }
  return acc;
}

}  // namespace bnpmeta
