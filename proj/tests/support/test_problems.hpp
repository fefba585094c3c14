#pragma once

#include "lsgd/problem.hpp"

#include <cmath>

namespace lsgd::testing {

/// f(x) = sum_i x_i^3 on a single virtual sample; its residue is nonzero.
class CubicProblem final : public LossProblem {
 public:
  explicit CubicProblem(std::size_t d) : LossProblem(d, 1) {}
  ProblemKind kind() const override { return ProblemKind::quadratic; }

 protected:
  double eval_loss(const ParamVector& x, IndexSpan) const override {
    return x.array().cube().sum();
  }
  Vector eval_grad(const ParamVector& x, IndexSpan) const override {
    return 3.0 * x.array().square().matrix();
  }
  Matrix eval_hessian(const ParamVector& x, IndexSpan) const override {
    return (6.0 * x).asDiagonal();
  }
  Vector eval_hvp(const ParamVector& x, IndexSpan, const Vector& v) const override {
    return (6.0 * x).cwiseProduct(v);
  }
};

}  // namespace lsgd::testing
