#pragma once

// Independent reference computations used by the tests.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "bnpmeta/design.hpp"
#include "bnpmeta/model.hpp"

namespace oracles {

// Posterior of (beta, phi) for y ~ N(X beta, phi V), beta ~ N(0, D),
// phi ~ Gamma(a, b): the single-cluster model with mu fixed at 0.
// beta | phi, y is Gaussian, so only phi needs quadrature (on log phi).
struct RegressionPosterior {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  double phi_mean = 0.0;
  double phi_sd = 0.0;
};

inline RegressionPosterior single_cluster_posterior(const bnpmeta::Design& d, const bnpmeta::PriorConfig& prior,
                                                    int points = 40001) {
  const Eigen::Index n = d.size(), p = d.coefficients();
  Eigen::VectorXd prior_var = Eigen::VectorXd::Constant(p, prior.slope_var);
  prior_var[0] = prior.beta0_var;
  const Eigen::MatrixXd xdx = d.x * prior_var.asDiagonal() * d.x.transpose();

  auto log_marginal = [&](double phi) {
    Eigen::MatrixXd cov = xdx;
    cov.diagonal() += phi * d.var;
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const Eigen::VectorXd a = llt.matrixL().solve(d.y);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * a.squaredNorm() - 0.5 * logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
  };
  auto log_weight = [&](double t) {
    const double phi = std::exp(t);
    return bnpmeta::gamma_log_pdf(phi, prior.phi_shape, prior.phi_rate) + t + log_marginal(phi);
  };

  // locate the bulk of p(log phi | y) on a coarse grid, then integrate finely
  double best = -bnpmeta::kInf, t_best = 0.0;
  for (double t = -30.0; t <= 15.0; t += 0.01) {
    const double v = log_weight(t);
    if (v > best) best = v, t_best = t;
  }
  const double lo = t_best - 25.0, hi = t_best + 12.0;
  const double h = (hi - lo) / (points - 1);

  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(p, p);
  double z = 0.0, f1 = 0.0, f2 = 0.0;
  const Eigen::VectorXd inv_var = d.var.cwiseInverse();
  for (int k = 0; k < points; ++k) {
    const double t = lo + h * k;
    const double phi = std::exp(t);
    const double w = (k == 0 || k == points - 1 ? 0.5 : 1.0) * std::exp(log_weight(t) - best);
    if (w == 0.0) continue;
    Eigen::MatrixXd precision = d.x.transpose() * inv_var.asDiagonal() * d.x / phi;
    precision.diagonal() += prior_var.cwiseInverse();
    const Eigen::LLT<Eigen::MatrixXd> llt(precision);
    const Eigen::VectorXd mean = llt.solve(d.x.transpose() * inv_var.cwiseProduct(d.y) / phi);
    const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(p, p));
    z += w;
    m1 += w * mean;
    m2 += w * (cov + mean * mean.transpose());
    f1 += w * phi;
    f2 += w * phi * phi;
  }
  RegressionPosterior out;
  out.mean = m1 / z;
  out.sd = (m2 / z - out.mean * out.mean.transpose()).diagonal().array().sqrt();
  out.phi_mean = f1 / z;
  out.phi_sd = std::sqrt(f2 / z - out.phi_mean * out.phi_mean);
  return out;
}

// Moments of a density known up to a constant on a 1-D interval (trapezoid).
struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

template <class LogDensity>
Moments moments_by_quadrature(LogDensity&& logf, double lo, double hi, int points = 200001) {
  const double h = (hi - lo) / (points - 1);
  double best = -bnpmeta::kInf;
  for (int k = 0; k < points; ++k) best = std::max(best, logf(lo + h * k));
  double z = 0.0, m1 = 0.0, m2 = 0.0;
  for (int k = 0; k < points; ++k) {
    const double x = lo + h * k;
    const double w = (k == 0 || k == points - 1 ? 0.5 : 1.0) * std::exp(logf(x) - best);
    z += w;
    m1 += w * x;
    m2 += w * x * x;
  }
  const double mean = m1 / z;
  return {mean, m2 / z - mean * mean};
}

}  // namespace oracles
