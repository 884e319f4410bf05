#pragma once

// Posterior predictive quantities computed from a chain of draws.

#include <algorithm>
#include <cmath>
#include <iostream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bnpmeta/dataset.hpp"
#include "bnpmeta/distributions.hpp"
#include "bnpmeta/mcmc.hpp"
#include "bnpmeta/model.hpp"

namespace bnpmeta {

struct GridSpec {
  double y_min = -0.25;
  double y_max = 1.25;
  int points = 601;

  void validate() const {
    if (!(y_min < y_max) || points < 3) throw std::invalid_argument("GridSpec: need y_min < y_max and >= 3 points");
  }

  std::vector<double> values() const {
    std::vector<double> g(static_cast<std::size_t>(points));
    const double step = (y_max - y_min) / (points - 1);
    for (int k = 0; k < points; ++k) g[static_cast<std::size_t>(k)] = y_min + step * k;
    g.back() = y_max;
    return g;
  }
};

/// Moderators on the original scale (nullopt = held at standardized zero),
/// the sampling variance to condition on, and the evaluation grid.
struct PredictiveQuery {
  std::vector<std::optional<double>> moderators;
  double var_condition = 0.001;
  GridSpec grid;

  static PredictiveQuery baseline(std::size_t moderator_count) {
    PredictiveQuery q;
    q.moderators.assign(moderator_count, std::nullopt);
    return q;
  }
};

/// Mixture components of f(y | x; state) for one draw, conditioning on
/// sampling variance `var`. Cells with no assigned observations (when the draw
/// records occupancy) and the mass outside an open window are replaced by
/// their random effect integrated against N(0, sigma_mu2).
inline void append_predictive_components(const Draw& draw, const Eigen::VectorXd& x, double var, double weight_scale,
                                         std::vector<Component>& out) {
  const auto& s = draw.state;
  const double mean = x.dot(s.beta);
  const double eta = x.dot(s.beta_omega);
  const double v = s.phi * var;
  const WeightWindow w{s.mu.j_min(), s.mu.j_max(), 0.0, draw.closed_window};
  const bool know_occupancy = draw.occupancy.size() == s.mu.size();
  double marginal = 0.0;
  for (int j = w.j_min; j <= w.j_max; ++j) {
    const double wj = std::exp(log_cell_weight(j, eta, s.sigma_omega, w));
    if (wj <= 0.0) continue;
    if (know_occupancy && draw.occupancy[static_cast<std::size_t>(j - w.j_min)] == 0)
      marginal += wj;
    else
      out.push_back({weight_scale * wj, mean + s.mu[j], v});
  }
  marginal += outside_window_mass(eta, s.sigma_omega, w);
  if (marginal > 0.0) out.push_back({weight_scale * marginal, mean, v + s.sigma_mu2});
}

inline std::vector<Component> predictive_components(std::span<const Draw> draws, const Eigen::VectorXd& x, double var) {
  if (draws.empty()) throw std::invalid_argument("predictive: chain has no draws");
  if (!(var > 0.0)) throw std::invalid_argument("predictive: conditioning variance must be positive");
  std::vector<Component> out;
  const double scale = 1.0 / static_cast<double>(draws.size());
  for (const auto& d : draws) append_predictive_components(d, x, var, scale, out);
  return out;
}

inline double mixture_cdf(double y, std::span<const Component> components) {
  double acc = 0.0;
  for (const auto& c : components) acc += c.weight * normal_cdf((y - c.mean) / std::sqrt(c.variance));
  return acc;
}

struct MixtureMoments {
  double mean = 0.0;
  double variance = 0.0;
};

inline MixtureMoments mixture_moments(std::span<const Component> components) {
  double w = 0.0, m1 = 0.0, m2 = 0.0;
  for (const auto& c : components) {
    w += c.weight;
    m1 += c.weight * c.mean;
    m2 += c.weight * (c.variance + c.mean * c.mean);
  }
  m1 /= w;
  m2 /= w;
  return {m1, std::max(0.0, m2 - m1 * m1)};
}

struct DensityEstimate {
  std::vector<double> grid;
  std::vector<double> density;
  double mean = 0.0;
  double median = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double kurtosis = 0.0;  // non-excess (3 for a normal)
  std::vector<double> modes;
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
  double mass_in_grid = 1.0;  // exact predictive mass inside [grid.front(), grid.back()]
  bool grid_extended = false;
  std::vector<std::string> warnings;
};

inline double trapezoid(std::span<const double> x, std::span<const double> f) {
  double acc = 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) acc += 0.5 * (f[k] + f[k - 1]) * (x[k] - x[k - 1]);
  return acc;
}

/// Strict local maxima of `density` on the grid (a flat top counts once,
/// at its center). Maxima closer than two grid steps are merged, keeping the
/// higher one.
inline std::vector<double> find_modes(std::span<const double> grid, std::span<const double> density) {
  std::vector<std::size_t> peaks;
  const std::size_t n = density.size();
  std::size_t k = 1;
  while (k + 1 < n) {
    if (density[k] > density[k - 1]) {
      std::size_t end = k;
      while (end + 1 < n && density[end + 1] == density[k]) ++end;
      if (end + 1 < n && density[end + 1] < density[k]) peaks.push_back((k + end) / 2);
      k = end + 1;
    } else {
      ++k;
    }
  }
  std::vector<std::size_t> merged;
  for (std::size_t p : peaks) {
    if (!merged.empty() && p - merged.back() <= 2) {
      if (density[p] > density[merged.back()]) merged.back() = p;
    } else {
      merged.push_back(p);
    }
  }
  std::vector<double> modes;
  for (std::size_t p : merged) modes.push_back(grid[p]);
  return modes;
}

/// Quantile of the grid density by linear interpolation of the cumulative
/// trapezoid integral (normalized to one).
inline double grid_quantile(std::span<const double> grid, std::span<const double> density, double p) {
  std::vector<double> cdf(grid.size(), 0.0);
  for (std::size_t k = 1; k < grid.size(); ++k)
    cdf[k] = cdf[k - 1] + 0.5 * (density[k] + density[k - 1]) * (grid[k] - grid[k - 1]);
  const double total = cdf.back();
  if (!(total > 0.0)) return kNaN;
  const double target = p * total;
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
  if (it == cdf.begin()) return grid.front();
  if (it == cdf.end()) return grid.back();
  const auto k = static_cast<std::size_t>(it - cdf.begin());
  const double span = cdf[k] - cdf[k - 1];
  const double frac = span > 0.0 ? (target - cdf[k - 1]) / span : 0.0;
  return grid[k - 1] + frac * (grid[k] - grid[k - 1]);
}

/// Moments, quartiles and modes of a density tabulated on a grid.
inline DensityEstimate summarize_density(std::vector<double> grid, std::vector<double> density) {
  DensityEstimate d;
  const double total = trapezoid(grid, density);
  if (!(total > 0.0)) throw std::invalid_argument("summarize_density: density integrates to zero");
  std::vector<double> f(density.size());
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = density[k] / total;
  auto moment = [&](auto&& g) {
    std::vector<double> h(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) h[k] = g(grid[k]) * f[k];
    return trapezoid(grid, h);
  };
  d.mean = moment([](double y) { return y; });
  d.variance = moment([&](double y) { return (y - d.mean) * (y - d.mean); });
  const double m3 = moment([&](double y) { return std::pow(y - d.mean, 3); });
  const double m4 = moment([&](double y) { return std::pow(y - d.mean, 4); });
  d.skewness = d.variance > 0.0 ? m3 / std::pow(d.variance, 1.5) : 0.0;
  d.kurtosis = d.variance > 0.0 ? m4 / (d.variance * d.variance) : 0.0;
  d.q25 = grid_quantile(grid, density, 0.25);
  d.q50 = grid_quantile(grid, density, 0.5);
  d.q75 = grid_quantile(grid, density, 0.75);
  d.median = d.q50;
  d.modes = find_modes(grid, density);
  d.grid = std::move(grid);
  d.density = std::move(density);
  return d;
}

namespace detail {

// Smallest y with mixture CDF >= p, by bisection.
inline double mixture_quantile(std::span<const Component> comps, double p) {
  const auto mom = mixture_moments(comps);
  double sd = std::sqrt(mom.variance) + 1e-12;
  double lo = mom.mean - 10.0 * sd, hi = mom.mean + 10.0 * sd;
  while (mixture_cdf(lo, comps) > p) lo -= 10.0 * sd;
  while (mixture_cdf(hi, comps) < p) hi += 10.0 * sd;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * (1.0 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (mixture_cdf(mid, comps) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Largest tolerated predictive mass outside the evaluation grid.
inline constexpr double kOutsideGridTolerance = 0.005;

/// Tabulates the predictive density for a standardized design row. If more
/// than 0.5% of the mass falls outside the grid, the grid is widened once
/// (same number of points) and a warning recorded.
inline DensityEstimate predictive_density_at(std::span<const Draw> draws, const Eigen::VectorXd& x, double var,
                                             GridSpec grid) {
  grid.validate();
  const auto comps = predictive_components(draws, x, var);
  auto inside = [&](const GridSpec& g) { return mixture_cdf(g.y_max, comps) - mixture_cdf(g.y_min, comps); };
  double mass = inside(grid);
  std::vector<std::string> warnings;
  bool extended = false;
  if (mass < 1.0 - kOutsideGridTolerance) {
    GridSpec wider = grid;
    wider.y_min = std::min(grid.y_min, detail::mixture_quantile(comps, 2.5e-4));
    wider.y_max = std::max(grid.y_max, detail::mixture_quantile(comps, 1.0 - 2.5e-4));
    warnings.push_back("predictive mass outside grid was " + csv::format_double(1.0 - mass) + "; grid widened to [" +
                       csv::format_double(wider.y_min) + ", " + csv::format_double(wider.y_max) + "]");
    grid = wider;
    mass = inside(grid);
    extended = true;
  }
  auto ys = grid.values();
  std::vector<double> f(ys.size());
  for (std::size_t k = 0; k < ys.size(); ++k) f[k] = mixture_density(ys[k], comps);
  auto est = summarize_density(std::move(ys), std::move(f));
  est.mass_in_grid = mass;
  est.grid_extended = extended;
  est.warnings = std::move(warnings);
  return est;
}

inline DensityEstimate predictive_density(const Chain& chain, const PredictiveQuery& query, const Standardization& st) {
  if (!(query.var_condition > 0.0)) throw std::invalid_argument("predictive_density: var_condition must be positive");
  return predictive_density_at(chain.draws, st.design_row(query.moderators), query.var_condition, query.grid);
}

struct Interval {
  double mean = 0.0;
  double lower = 0.0;  // 2.5% quantile
  double upper = 0.0;  // 97.5% quantile
  bool significant = false;  // interval excludes 0
};

struct CoefficientRow {
  std::string name;
  Interval standardized;
  Interval original;
};

inline Interval summarize_draws(std::vector<double> values) {
  Interval out;
  double acc = 0.0;
  for (double v : values) acc += v;
  out.mean = acc / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  out.lower = sorted_quantile(values, 0.025);
  out.upper = sorted_quantile(values, 0.975);
  out.significant = out.lower > 0.0 || out.upper < 0.0;
  return out;
}

/// Intercept and slopes with 95% credible intervals on the standardized scale
/// and mapped back to the moderators' original units.
inline std::vector<CoefficientRow> coefficient_table(const Chain& chain, const Standardization& st) {
  if (chain.empty()) throw std::invalid_argument("coefficient_table: chain has no draws");
  const std::size_t p = st.size();
  if (static_cast<std::size_t>(chain.draws.front().state.beta.size()) != p + 1)
    throw std::invalid_argument("coefficient_table: chain and standardization disagree on moderator count");
  std::vector<std::vector<double>> std_draws(p + 1), orig_draws(p + 1);
  for (const auto& d : chain.draws) {
    const auto& b = d.state.beta;
    double intercept = b[0];
    for (std::size_t k = 0; k < p; ++k) {
      const double slope = b[static_cast<Eigen::Index>(k) + 1];
      std_draws[k + 1].push_back(slope);
      orig_draws[k + 1].push_back(slope / st.scales[k]);
      intercept -= slope * st.centers[k] / st.scales[k];
    }
    std_draws[0].push_back(b[0]);
    orig_draws[0].push_back(intercept);
  }
  std::vector<CoefficientRow> rows;
  for (std::size_t k = 0; k <= p; ++k)
    rows.push_back({k == 0 ? "Intercept" : st.names[k - 1], summarize_draws(std_draws[k]), summarize_draws(orig_draws[k])});
  return rows;
}

inline void write_coefficient_csv(std::ostream& out, std::span<const CoefficientRow> rows) {
  csv::write_row(out, {"moderator", "mean", "ci_lower", "ci_upper", "significant", "mean_original", "ci_lower_original",
                       "ci_upper_original", "significant_original"});
  auto f = [](double v) { return csv::format_double(v); };
  for (const auto& r : rows)
    csv::write_row(out, {r.name, f(r.standardized.mean), f(r.standardized.lower), f(r.standardized.upper),
                         r.standardized.significant ? "1" : "0", f(r.original.mean), f(r.original.lower),
                         f(r.original.upper), r.original.significant ? "1" : "0"});
}

inline const std::vector<std::string>& informant_moderators() {
  static const std::vector<std::string> names{"mom", "dad", "teacher", "self", "observer"};
  return names;
}

struct ProfilePoint {
  std::string informant;
  double age = 0.0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

/// Predictive median and quartiles over ages for one informant type: that
/// informant's indicator 1, the other four 0, longsampl 1, age set, and every
/// other moderator at standardized zero.
inline std::vector<ProfilePoint> profile_curve(const Chain& chain, const std::string& informant,
                                               std::span<const double> ages, const Standardization& st,
                                               double var_condition = 0.001, GridSpec grid = {},
                                               std::ostream* warnings = &std::clog) {
  const auto& informants = informant_moderators();
  if (std::find(informants.begin(), informants.end(), informant) == informants.end())
    throw std::invalid_argument("unknown informant '" + informant + "' (expected mom, dad, teacher, self or observer)");
  const auto age_index = st.index_of("age");
  const auto long_index = st.index_of("longsampl");
  if (!age_index || !long_index) throw std::invalid_argument("profile_curve: moderators 'age' and 'longsampl' required");
  PredictiveQuery q = PredictiveQuery::baseline(st.size());
  q.var_condition = var_condition;
  q.grid = grid;
  for (const auto& name : informants) {
    const auto k = st.index_of(name);
    if (!k) throw std::invalid_argument("profile_curve: moderator '" + name + "' missing");
    q.moderators[*k] = name == informant ? 1.0 : 0.0;
  }
  q.moderators[*long_index] = 1.0;
  std::vector<ProfilePoint> out;
  for (double age : ages) {
    if (warnings && (age < st.minimums[*age_index] || age > st.maximums[*age_index]))
      *warnings << "warning: age " << age << " outside observed range [" << st.minimums[*age_index] << ", "
                << st.maximums[*age_index] << "]\n";
    q.moderators[*age_index] = age;
    const auto d = predictive_density(chain, q, st);
    out.push_back({informant, age, d.median, d.q25, d.q75});
  }
  return out;
}

inline void write_profile_csv(std::ostream& out, std::span<const ProfilePoint> rows) {
  csv::write_row(out, {"informant", "age", "median", "q25", "q75"});
  for (const auto& r : rows)
    csv::write_row(out, {r.informant, csv::format_double(r.age), csv::format_double(r.median),
                         csv::format_double(r.q25), csv::format_double(r.q75)});
}

struct BiasCurvePoint {
  double se = 0.0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

struct PublicationBiasReport {
  Interval slope_standardized;
  Interval slope_original;
  double prob_positive = 0.0;  // posterior P(slope > 0)
  std::vector<BiasCurvePoint> curve;
  double median_movement = 0.0;  // max - min predictive median across the SE range
  double pooled_iqr = 0.0;       // average IQR along the curve
  bool bias_indicated = false;
  std::string verdict;
};

/// Publication-bias probe through the SE moderator: the SE slope's posterior
/// plus the predictive median as SE sweeps its observed range (all other
/// moderators at standardized zero). Bias is indicated only when the slope's
/// 95% interval excludes zero and the median moves by more than the pooled IQR.
inline PublicationBiasReport publication_bias_report(const Chain& chain, const Standardization& st,
                                                     double var_condition = 0.001, GridSpec grid = {},
                                                     int curve_points = 11) {
  if (chain.empty()) throw std::invalid_argument("publication_bias_report: chain has no draws");
  const auto se = st.index_of("SE");
  if (!se) throw std::invalid_argument("publication_bias_report: no SE moderator");
  const auto table = coefficient_table(chain, st);
  PublicationBiasReport r;
  r.slope_standardized = table[*se + 1].standardized;
  r.slope_original = table[*se + 1].original;
  double positive = 0.0;
  for (const auto& d : chain.draws) positive += d.state.beta[static_cast<Eigen::Index>(*se) + 1] > 0.0 ? 1.0 : 0.0;
  r.prob_positive = positive / static_cast<double>(chain.size());

  PredictiveQuery q = PredictiveQuery::baseline(st.size());
  q.var_condition = var_condition;
  q.grid = grid;
  const double lo = st.minimums[*se], hi = st.maximums[*se];
  const int points = lo < hi ? std::max(2, curve_points) : 1;
  double iqr_sum = 0.0;
  double med_lo = kInf, med_hi = -kInf;
  for (int k = 0; k < points; ++k) {
    const double value = points == 1 ? lo : lo + (hi - lo) * k / (points - 1);
    q.moderators[*se] = value;
    const auto d = predictive_density(chain, q, st);
    r.curve.push_back({value, d.median, d.q25, d.q75});
    iqr_sum += d.q75 - d.q25;
    med_lo = std::min(med_lo, d.median);
    med_hi = std::max(med_hi, d.median);
  }
  r.median_movement = med_hi - med_lo;
  r.pooled_iqr = iqr_sum / points;
  const bool moves = r.median_movement > r.pooled_iqr;
  r.bias_indicated = r.slope_standardized.significant && moves;
  r.verdict = r.bias_indicated ? "bias indicated"
              : r.slope_standardized.significant ? "no strong bias"
                                                 : "no bias indicated";
  return r;
}

struct FiveNumber {
  double min = 0.0, q25 = 0.0, median = 0.0, q75 = 0.0, max = 0.0;
};

inline FiveNumber five_number_summary(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return {v.front(), sorted_quantile(v, 0.25), sorted_quantile(v, 0.5), sorted_quantile(v, 0.75), v.back()};
}

struct FitScore {
  double total = 0.0;
  std::vector<double> per_obs;
  std::vector<double> per_obs_root;
  FiveNumber root_summary;
};

/// Predictive mean-square error D(m) = sum_i (y_i - E_n(Y_i|x_i))^2 + Var_n(Y_i|x_i),
/// each predictive conditioned on the observation's own sampling variance.
inline FitScore fit_score(const Chain& chain, const Design& design) {
  if (chain.empty()) throw std::invalid_argument("fit_score: chain has no draws");
  if (chain.draws.front().state.beta.size() != design.coefficients())
    throw std::invalid_argument("fit_score: chain and dataset disagree on moderator count");
  FitScore out;
  for (Eigen::Index i = 0; i < design.size(); ++i) {
    const auto comps = predictive_components(chain.draws, design.x.row(i).transpose(), design.var[i]);
    const auto m = mixture_moments(comps);
    const double bias = design.y[i] - m.mean;
    out.per_obs.push_back(bias * bias + m.variance);
  }
  for (double d : out.per_obs) {
    out.total += d;
    out.per_obs_root.push_back(std::sqrt(d));
  }
  if (!out.per_obs_root.empty()) out.root_summary = five_number_summary(out.per_obs_root);
  return out;
}

/// The integral form of D_i, int (y_i - y)^2 f_n(y | x_i) dy, by the trapezoid
/// rule on `grid` (no renormalization).
inline std::vector<double> fit_score_integral(const Chain& chain, const Design& design, GridSpec grid = {}) {
  grid.validate();
  const auto ys = grid.values();
  std::vector<double> out;
  std::vector<double> f(ys.size());
  for (Eigen::Index i = 0; i < design.size(); ++i) {
    const auto comps = predictive_components(chain.draws, design.x.row(i).transpose(), design.var[i]);
    for (std::size_t k = 0; k < ys.size(); ++k) {
      const double d = design.y[i] - ys[k];
      f[k] = d * d * mixture_density(ys[k], comps);
    }
    out.push_back(trapezoid(ys, f));
  }
  return out;
}

}  // namespace bnpmeta
