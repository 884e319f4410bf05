#pragma once

// Heritability effect sizes from MZ/DZ twin correlations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bnpmeta/random.hpp"

namespace bnpmeta {

struct TwinCorrelations {
  double rho_mz = 0.0;
  double rho_dz = 0.0;
  long n_mz = 0;  // pair counts
  long n_dz = 0;
};

struct HeritabilityEstimate {
  double h2 = 0.0;
  double var = 0.0;
  bool pooled = false;
};

namespace detail {

inline void check_correlation(double rho, const char* name) {
  if (!std::isfinite(rho) || rho < -1.0 || rho > 1.0)
    throw std::domain_error(std::string(name) + " must be a finite correlation in [-1, 1]");
}

}  // namespace detail

/// h2 = 2 (rho_mz - rho_dz). Not clamped to [0, 1].
inline double falconer_h2(const TwinCorrelations& c) {
  detail::check_correlation(c.rho_mz, "rho_mz");
  detail::check_correlation(c.rho_dz, "rho_dz");
  return 2.0 * (c.rho_mz - c.rho_dz);
}

/// Large-sample variance of falconer_h2: 4 [(1 - rho_mz^2)^2 / n_mz + (1 - rho_dz^2)^2 / n_dz].
inline double falconer_variance(const TwinCorrelations& c) {
  detail::check_correlation(c.rho_mz, "rho_mz");
  detail::check_correlation(c.rho_dz, "rho_dz");
  if (c.n_mz < 2 || c.n_dz < 2) throw std::domain_error("pair counts must be at least 2");
  const double a = 1.0 - c.rho_mz * c.rho_mz;
  const double b = 1.0 - c.rho_dz * c.rho_dz;
  return 4.0 * (a * a / static_cast<double>(c.n_mz) + b * b / static_cast<double>(c.n_dz));
}

inline HeritabilityEstimate falconer_estimate(const TwinCorrelations& c) {
  return {falconer_h2(c), falconer_variance(c), false};
}

/// Fixed-effect inverse-variance average of several estimates of the same
/// sample (e.g. one per informant). The pooled variance is 1 / sum(1/var_i).
inline HeritabilityEstimate pool_within_study(std::span<const HeritabilityEstimate> estimates) {
  if (estimates.empty()) throw std::invalid_argument("pool_within_study: no estimates");
  double weight_sum = 0.0;
  double weighted = 0.0;
  for (const auto& e : estimates) {
    if (!std::isfinite(e.h2)) throw std::domain_error("pool_within_study: non-finite h2");
    if (!(e.var > 0.0) || !std::isfinite(e.var))
      throw std::domain_error("pool_within_study: variance must be positive (weight undefined)");
    weight_sum += 1.0 / e.var;
    weighted += e.h2 / e.var;
  }
  return {weighted / weight_sum, 1.0 / weight_sum, true};
}

namespace detail {

// Product-moment correlation of `n` pairs drawn with true correlation rho.
// Returns NaN when either margin has zero sample variance.
inline double sample_pair_correlation(double rho, long n, Rng& rng) {
  const double residual_sd = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  double mean_a = 0.0, mean_b = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
  for (long k = 0; k < n; ++k) {
    const double a = rng.normal();
    const double b = rho * a + residual_sd * rng.normal();
    // Welford update of means and co-moments
    const double da = a - mean_a;
    const double db = b - mean_b;
    const double w = 1.0 / static_cast<double>(k + 1);
    mean_a += da * w;
    mean_b += db * w;
    saa += da * (a - mean_a);
    sbb += db * (b - mean_b);
    sab += da * (b - mean_b);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace detail

/// Simulate MZ and DZ twin samples from an additive-genetic (a2) plus
/// shared-environment (c2) model on a standardized trait. MZ pairs correlate
/// a2 + c2, DZ pairs a2/2 + c2. Deterministic given `seed`.
inline TwinCorrelations simulate_twin_sample(double a2, double c2, long n_mz, long n_dz,
                                             std::uint64_t seed) {
  if (!std::isfinite(a2) || !std::isfinite(c2) || a2 < 0.0 || c2 < 0.0 || a2 + c2 > 1.0)
    throw std::domain_error("simulate_twin_sample: (a2, c2) outside the variance simplex");
  if (n_mz < 2 || n_dz < 2) throw std::domain_error("simulate_twin_sample: need at least 2 pairs");
  Rng rng(seed);
  auto draw = [&](double rho, long n, const char* label) {
    for (;;) {
      const double r = detail::sample_pair_correlation(rho, n, rng);
      if (!std::isnan(r)) return r;
      std::clog << "simulate_twin_sample: degenerate " << label << " draw resampled\n";
    }
  };
  TwinCorrelations out;
  out.n_mz = n_mz;
  out.n_dz = n_dz;
  out.rho_mz = draw(a2 + c2, n_mz, "MZ");
  out.rho_dz = draw(0.5 * a2 + c2, n_dz, "DZ");
  return out;
}

}  // namespace bnpmeta
