#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "bnpmeta/distributions.hpp"

namespace bnpmeta {

/// Explicitly seeded 64-bit Mersenne Twister.
///
/// Independent streams (one per parallel chain, one per simulation
/// replication) are derived by feeding (seed, stream) through std::seed_seq,
/// so stream k of a run can be regenerated without running streams 0..k-1.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
  }

  /// Uniform on [0, 1).
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  /// Uniform on (0, 1).
  double uniform_open() {
    double u = 0.0;
    while (u == 0.0) u = uniform();
    return u;
  }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }

  double gamma(double shape, double rate) {
    return std::gamma_distribution<double>(shape, 1.0 / rate)(engine_);
  }

  double exponential(double rate) { return -std::log(uniform_open()) / rate; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

namespace detail {

// Standard normal restricted to (a, b] with 0 <= a < b.
inline double upper_tail_normal(double a, double b, Rng& rng) {
  if (a < 5.0) {
    const double qa = normal_survival(a);
    const double qb = normal_survival(b);
    const double x = normal_survival_quantile(qb + rng.uniform_open() * (qa - qb));
    return std::clamp(x, a, b);
  }
  if ((b - a) * a < 1.0) {
    // narrow interval far in the tail: uniform proposals
    for (;;) {
      const double x = a + rng.uniform() * (b - a);
      if (rng.uniform() <= std::exp(-0.5 * (x - a) * (x + a))) return x;
    }
  }
  // Robert (1995) translated-exponential proposals
  const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double x = a + rng.exponential(rate);
    if (x > b) continue;
    const double d = x - rate;
    if (rng.uniform() <= std::exp(-0.5 * d * d)) return x;
  }
}

}  // namespace detail

/// Draw from the standard normal restricted to (lo, hi]. Bounds may be infinite.
inline double truncated_standard_normal(double lo, double hi, Rng& rng) {
  if (!(lo < hi)) throw std::domain_error("truncated_standard_normal: empty interval");
  if (lo >= 0.0) return detail::upper_tail_normal(lo, hi, rng);
  if (hi <= 0.0) return -detail::upper_tail_normal(-hi, -lo, rng);
  const double plo = normal_cdf(lo);
  const double phi = normal_cdf(hi);
  const double x = normal_quantile(plo + rng.uniform_open() * (phi - plo));
  return std::clamp(x, lo, hi);
}

/// One univariate slice-sampling transition (stepping out, then shrinkage).
///
/// `log_density` may return -inf outside its support; `lower`/`upper` bound the
/// search interval. The starting point must have finite log density.
template <class LogDensity>
double slice_sample(double x0, const LogDensity& log_density, double width, Rng& rng,
                    double lower = -kInf, double upper = kInf, int max_steps = 64) {
  const double f0 = log_density(x0);
  if (!std::isfinite(f0)) throw std::domain_error("slice_sample: start point outside support");
  const double level = f0 - rng.exponential(1.0);

  double left = x0 - width * rng.uniform();
  double right = left + width;
  int steps_left = static_cast<int>(std::floor(max_steps * rng.uniform()));
  int steps_right = max_steps - 1 - steps_left;
  while (steps_left-- > 0 && left > lower && log_density(left) > level) left -= width;
  while (steps_right-- > 0 && right < upper && log_density(right) > level) right += width;
  left = std::max(left, lower);
  right = std::min(right, upper);

  for (;;) {
    const double x1 = left + rng.uniform() * (right - left);
    if (log_density(x1) > level) return x1;
    if (x1 < x0)
      left = x1;
    else
      right = x1;
    if (right - left <= 1e-14 * (1.0 + std::abs(x0))) return x0;
  }
}

}  // namespace bnpmeta
