#pragma once

// Linear regression baselines over precomputed features: one predicting the
// scalar minute of day, one predicting its unit-circle encoding.

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <vector>

#include "ticl/alt_encoders.hpp"
#include "ticl/model.hpp"
#include "ticl/time_core.hpp"

namespace ticl {

inline constexpr double kRegressionRidge = 1e-8;

struct ScalarRegressor {
  Vector weights;
  double bias = 0.0;

  /// Raw regression output in minutes (not wrapped).
  double raw(std::span<const double> x) const {
    double y = bias;
    for (std::size_t j = 0; j < x.size(); ++j) y += weights(static_cast<Eigen::Index>(j)) * x[j];
    return y;
  }
};

struct CyclicRegressor {
  Matrix weights;  // D x 2, columns predict (cos, sin)
  Eigen::Vector2d bias = Eigen::Vector2d::Zero();

  Eigen::Vector2d raw(std::span<const double> x) const {
    Eigen::Vector2d y = bias;
    for (std::size_t j = 0; j < x.size(); ++j) y += weights.row(static_cast<Eigen::Index>(j)).transpose() * x[j];
    return y;
  }
};

namespace detail {

/// Ridge-regularized least squares with an intercept column; returns (D+1) x targets.
inline Matrix solve_least_squares(const Matrix& x, const Matrix& y, double ridge) {
  Matrix a(x.rows(), x.cols() + 1);
  a.leftCols(x.cols()) = x;
  a.col(x.cols()).setOnes();
  Matrix gram = a.transpose() * a;
  gram.diagonal().array() += ridge;
  return gram.ldlt().solve(a.transpose() * y);
}

}  // namespace detail

/// Minimizes mean (y - f(x))^2 with y = minute of day.
inline ScalarRegressor fit_scalar(const Dataset& ds) {
  if (ds.empty()) throw ValidationError("fit_scalar: empty dataset");
  Matrix y(static_cast<Eigen::Index>(ds.size()), 1);
  for (std::size_t i = 0; i < ds.size(); ++i) y(static_cast<Eigen::Index>(i), 0) = ds.records[i].time.minute_of_day();
  const Matrix sol = detail::solve_least_squares(features_matrix(ds), y, kRegressionRidge);
  ScalarRegressor r;
  r.weights = sol.topRows(ds.dim).col(0);
  r.bias = sol(ds.dim, 0);
  return r;
}

/// Least squares against (cos theta, sin theta) targets.
inline CyclicRegressor fit_cyclic(const Dataset& ds) {
  if (ds.empty()) throw ValidationError("fit_cyclic: empty dataset");
  Matrix y(static_cast<Eigen::Index>(ds.size()), 2);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto [c, s] = cyclic_encode(ds.records[i].time);
    y(static_cast<Eigen::Index>(i), 0) = c;
    y(static_cast<Eigen::Index>(i), 1) = s;
  }
  const Matrix sol = detail::solve_least_squares(features_matrix(ds), y, kRegressionRidge);
  CyclicRegressor r;
  r.weights = sol.topRows(ds.dim);
  r.bias = sol.row(ds.dim).transpose();
  return r;
}

/// Scalar outputs wrap onto the clock face (mod 1440) after rounding.
inline ClockTime predict(const ScalarRegressor& r, std::span<const double> x) {
  const double y = r.raw(x);
  if (!std::isfinite(y)) throw std::domain_error("scalar regressor produced a non-finite output");
  return ClockTime::wrap(std::llround(y));
}

inline ClockTime predict(const CyclicRegressor& r, std::span<const double> x) {
  const Eigen::Vector2d y = r.raw(x);
  return cyclic_decode(y(0), y(1));
}

}  // namespace ticl
