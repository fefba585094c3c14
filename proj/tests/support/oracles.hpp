#pragma once

// Reference computations used by the tests. Each one takes a route that is
// independent of the library code it checks: finite differences instead of
// analytic derivatives, explicit matrix powers instead of eigenbasis
// formulas, LDLT solves instead of pseudo-inverses.

#include "lsgd/linalg.hpp"
#include "lsgd/problem.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <functional>

namespace lsgd::testing {

inline double fd_step(const Vector& x) { return 1e-6 * (1.0 + x.cwiseAbs().maxCoeff()); }

/// Central differences of the loss.
inline Vector fd_gradient(const LossProblem& p, const Vector& x, IndexSpan batch) {
  const double h = fd_step(x);
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    const double up = p.loss(xp, batch);
    xp(i) = x(i) - h;
    const double down = p.loss(xp, batch);
    xp(i) = x(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

/// Central differences of the analytic gradient, symmetrized.
inline Matrix fd_hessian(const LossProblem& p, const Vector& x, IndexSpan batch) {
  const double h = fd_step(x);
  Matrix out(x.size(), x.size());
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    const Vector up = p.grad(xp, batch);
    xp(i) = x(i) - h;
    const Vector down = p.grad(xp, batch);
    xp(i) = x(i);
    out.col(i) = (up - down) / (2.0 * h);
  }
  return 0.5 * (out + out.transpose());
}

/// sum_{k<K} (I - eta A)^k eta g by explicit repeated multiplication.
inline Vector geometric_update(const Matrix& a, const Vector& g, double eta, std::size_t k) {
  Vector term = eta * g;
  Vector sum = Vector::Zero(g.size());
  const Matrix step = Matrix::Identity(a.rows(), a.cols()) - eta * a;
  for (std::size_t i = 0; i < k; ++i) {
    sum += term;
    term = step * term;
  }
  return sum;
}

/// Direct solve of A s = g for SPD A.
inline Vector direct_newton(const Matrix& a, const Vector& g) { return a.ldlt().solve(g); }

/// Scalar max-norm relative difference.
inline double max_rel(const Matrix& a, const Matrix& b) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace lsgd::testing
