#pragma once

#include "nmtadv/numerics/graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace nmtadv {

/// max_i |a_i - n_i| / max(1e-8, |a_i| + |n_i|)
template <typename Derived1, typename Derived2>
double max_relative_error(const Eigen::MatrixBase<Derived1>& analytic,
                          const Eigen::MatrixBase<Derived2>& numeric) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.rows(); ++i) {
    for (Eigen::Index j = 0; j < analytic.cols(); ++j) {
      const double a = static_cast<double>(analytic(i, j));
      const double n = static_cast<double>(numeric(i, j));
      worst = std::max(worst, std::abs(a - n) / std::max(1e-8, std::abs(a) + std::abs(n)));
    }
  }
  return worst;
}

/// Central-difference gradient of a scalar function of a matrix.
template <typename Scalar>
Matrix<Scalar> numeric_gradient(const std::function<Scalar(const Matrix<Scalar>&)>& f,
                                Matrix<Scalar> x, Scalar eps) {
  Matrix<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const Scalar keep = x(i, j);
      x(i, j) = keep + eps;
      const Scalar up = f(x);
      x(i, j) = keep - eps;
      const Scalar down = f(x);
      x(i, j) = keep;
      out(i, j) = (up - down) / (Scalar(2) * eps);
    }
  }
  return out;
}

/// Builds `f` on a fresh graph with x as the only differentiable leaf and
/// compares backward() against central differences.
template <typename Scalar>
double grad_check(const std::function<Var<Scalar>(BasicGraph<Scalar>&, Var<Scalar>)>& f,
                  const Matrix<Scalar>& x, Scalar eps) {
  Matrix<Scalar> analytic;
  {
    BasicGraph<Scalar> g;
    auto in = g.input(x, true);
    auto out = f(g, in);
    g.backward(out);
    analytic = g.grad(in);
  }
  const std::function<Scalar(const Matrix<Scalar>&)> value = [&](const Matrix<Scalar>& probe) {
    BasicGraph<Scalar> g;
    auto in = g.input(probe, false);
    return f(g, in).value()(0, 0);
  };
  return max_relative_error(analytic, numeric_gradient<Scalar>(value, x, eps));
}

}  // namespace nmtadv
