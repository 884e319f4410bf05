#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace bnpmeta {

/// Regression inputs seen by the model: effect sizes, their sampling
/// variances, and a design matrix whose first column is the constant 1.
struct Design {
  Eigen::VectorXd y;
  Eigen::VectorXd var;
  Eigen::MatrixXd x;

  Eigen::Index size() const { return y.size(); }
  Eigen::Index coefficients() const { return x.cols(); }

  void validate() const {
    if (var.size() != y.size() || x.rows() != y.size())
      throw std::invalid_argument("Design: y, var and x must have the same number of rows");
    if (x.cols() < 1) throw std::invalid_argument("Design: x needs at least the constant column");
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (!std::isfinite(y[i])) throw std::invalid_argument("Design: non-finite y");
      if (!(var[i] > 0.0) || !std::isfinite(var[i]))
        throw std::invalid_argument("Design: sampling variances must be positive and finite");
    }
    if (!x.allFinite()) throw std::invalid_argument("Design: non-finite moderator value");
  }
};

}  // namespace bnpmeta
