#pragma once

// Scalar density and distribution functions used throughout the model.
// Everything that can underflow has a log-space variant.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace bnpmeta {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Upper tail 1 - Phi(x), accurate for large positive x.
inline double normal_survival(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }

/// log Phi(x). Uses the asymptotic Mills-ratio expansion once erfc underflows.
inline double normal_log_cdf(double x) {
  if (std::isnan(x)) return kNaN;
  if (x == -kInf) return -kInf;
  if (x == kInf) return 0.0;
  if (x > 0.0) return std::log1p(-normal_survival(x));
  if (x > -37.0) return std::log(normal_cdf(x));
  const double r = 1.0 / (x * x);
  return -0.5 * x * x - std::log(-x) - kLogSqrt2Pi + std::log1p(-r + 3.0 * r * r - 15.0 * r * r * r);
}

/// log(Phi(b) - Phi(a)) for a <= b; either bound may be infinite.
inline double log_normal_interval(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return kNaN;
  if (!(a < b)) return -kInf;
  if (a >= 0.0) {
    // both bounds in the upper tail: work with survival functions
    const double log_upper = normal_log_cdf(-a);
    const double log_lower = normal_log_cdf(-b);
    return log_upper + std::log1p(-std::exp(log_lower - log_upper));
  }
  if (b <= 0.0) {
    const double log_hi = normal_log_cdf(b);
    const double log_lo = normal_log_cdf(a);
    return log_hi + std::log1p(-std::exp(log_lo - log_hi));
  }
  return std::log1p(-normal_cdf(a) - normal_survival(b));
}

inline double normal_log_pdf(double y, double mean, double variance) {
  const double d = y - mean;
  return -0.5 * d * d / variance - 0.5 * std::log(variance) - kLogSqrt2Pi;
}

inline double normal_pdf(double y, double mean, double variance) {
  return std::exp(normal_log_pdf(y, mean, variance));
}

inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -kInf;
    if (p == 1.0) return kInf;
    throw std::domain_error("normal_quantile: probability outside [0, 1]");
  }
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

/// Inverse of the upper tail: returns x with 1 - Phi(x) = q.
inline double normal_survival_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) {
    if (q == 0.0) return kInf;
    if (q == 1.0) return -kInf;
    throw std::domain_error("normal_survival_quantile: probability outside [0, 1]");
  }
  return boost::math::quantile(boost::math::complement(boost::math::normal_distribution<double>(), q));
}

/// Gamma log density in the shape-rate parameterization.
inline double gamma_log_pdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return -kInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

inline double log_sum_exp(std::span<const double> terms) {
  double hi = -kInf;
  for (double t : terms) hi = std::max(hi, t);
  if (hi == -kInf || !std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - hi);
  return hi + std::log(acc);
}

inline double student_t_quantile(double p, double dof) {
  return boost::math::quantile(boost::math::students_t_distribution<double>(dof), p);
}

/// P(X > x) for X ~ chi-square(dof).
inline double chi_square_survival(double x, double dof) {
  if (x <= 0.0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(dof), x));
}

}  // namespace bnpmeta
