#pragma once

#include "lsgd/linalg.hpp"
#include "lsgd/rng.hpp"

#include <cstddef>
#include <memory>
#include <string_view>

namespace lsgd {

struct Dataset;

enum class ProblemKind { quadratic, logistic, softmax };

std::string_view to_string(ProblemKind kind);

inline constexpr std::size_t kDefaultHessianBudget = 4096;

/// A loss oracle f over a finite set of samples. Every batch-taking overload
/// averages over the given sample indices; the index-free overloads use the
/// whole dataset. Implementations are immutable and thread-safe.
class LossProblem {
 public:
  virtual ~LossProblem() = default;

  virtual ProblemKind kind() const = 0;
  std::size_t dim() const { return dim_; }
  std::size_t sample_count() const { return all_.size(); }
  const IndexList& all_samples() const { return all_; }

  std::size_t hessian_budget() const { return hessian_budget_; }
  void set_hessian_budget(std::size_t budget) { hessian_budget_ = budget; }

  double loss(const ParamVector& x, IndexSpan batch) const;
  double loss(const ParamVector& x) const { return loss(x, all_); }

  Vector grad(const ParamVector& x, IndexSpan batch) const;
  Vector grad(const ParamVector& x) const { return grad(x, all_); }

  /// Gradient as seen by a local SGD step: the batch gradient plus whatever
  /// noise model the problem carries. Draws only from `noise`.
  Vector stochastic_grad(const ParamVector& x, IndexSpan batch, CounterEngine& noise) const;

  /// Dense Hessian. Throws CapacityError when dim() exceeds the budget.
  Matrix hessian(const ParamVector& x, IndexSpan batch) const;
  Matrix hessian(const ParamVector& x) const { return hessian(x, all_); }

  Vector hvp(const ParamVector& x, IndexSpan batch, const Vector& v) const;
  Vector hvp(const ParamVector& x, const Vector& v) const { return hvp(x, all_, v); }

 protected:
  LossProblem(std::size_t dim, std::size_t samples);

  virtual double eval_loss(const ParamVector& x, IndexSpan batch) const = 0;
  virtual Vector eval_grad(const ParamVector& x, IndexSpan batch) const = 0;
  virtual Matrix eval_hessian(const ParamVector& x, IndexSpan batch) const = 0;
  virtual Vector eval_hvp(const ParamVector& x, IndexSpan batch, const Vector& v) const = 0;
  virtual void add_gradient_noise(Vector& /*g*/, CounterEngine& /*noise*/) const {}

  bool is_whole_dataset(IndexSpan batch) const {
    return batch.data() == all_.data() && batch.size() == all_.size();
  }

 private:
  void check(const ParamVector& x, IndexSpan batch) const;

  std::size_t dim_;
  IndexList all_;
  std::size_t hessian_budget_ = kDefaultHessianBudget;
};

/// f(x) = 1/2 x^T A x - b^T x with A symmetric positive semidefinite. The
/// loss is the same for every batch; `samples` only sizes the index space so
/// the problem can be sharded like a dataset. Optional additive N(0, s^2 I)
/// noise on stochastic gradients.
class QuadraticProblem final : public LossProblem {
 public:
  QuadraticProblem(Matrix a, Vector b, double noise_std = 0.0, std::size_t samples = 1);

  ProblemKind kind() const override { return ProblemKind::quadratic; }
  const Matrix& a() const { return a_; }
  const Vector& b() const { return b_; }
  double noise_std() const { return noise_std_; }

 protected:
  double eval_loss(const ParamVector& x, IndexSpan batch) const override;
  Vector eval_grad(const ParamVector& x, IndexSpan batch) const override;
  Matrix eval_hessian(const ParamVector& x, IndexSpan batch) const override;
  Vector eval_hvp(const ParamVector& x, IndexSpan batch, const Vector& v) const override;
  void add_gradient_noise(Vector& g, CounterEngine& noise) const override;

 private:
  Matrix a_;
  Vector b_;
  double noise_std_;
};

/// Binary logistic regression without intercept; labels in {0, 1}.
class LogisticProblem final : public LossProblem {
 public:
  explicit LogisticProblem(std::shared_ptr<const Dataset> data);

  ProblemKind kind() const override { return ProblemKind::logistic; }
  const Dataset& data() const { return *data_; }

 protected:
  double eval_loss(const ParamVector& x, IndexSpan batch) const override;
  Vector eval_grad(const ParamVector& x, IndexSpan batch) const override;
  Matrix eval_hessian(const ParamVector& x, IndexSpan batch) const override;
  Vector eval_hvp(const ParamVector& x, IndexSpan batch, const Vector& v) const override;

 private:
  std::shared_ptr<const Dataset> data_;
};

/// Affine map followed by softmax cross-entropy. Parameters are stored class
/// by class: entries [k*(p+1), k*(p+1)+p) are the weights of class k and
/// entry k*(p+1)+p is its bias, so dim = c*(p+1).
class SoftmaxProblem final : public LossProblem {
 public:
  explicit SoftmaxProblem(std::shared_ptr<const Dataset> data);

  ProblemKind kind() const override { return ProblemKind::softmax; }
  const Dataset& data() const { return *data_; }
  std::size_t classes() const { return classes_; }

  /// Index of the weight connecting feature j (j == p is the bias) to class k.
  std::size_t param_index(std::size_t k, std::size_t j) const { return k * (features_ + 1) + j; }

  /// Fraction of `data` classified correctly by argmax of the logits.
  double accuracy(const ParamVector& x, const Dataset& data) const;

 protected:
  double eval_loss(const ParamVector& x, IndexSpan batch) const override;
  Vector eval_grad(const ParamVector& x, IndexSpan batch) const override;
  Matrix eval_hessian(const ParamVector& x, IndexSpan batch) const override;
  Vector eval_hvp(const ParamVector& x, IndexSpan batch, const Vector& v) const override;

 private:
  RowMatrix augmented_batch(IndexSpan batch) const;
  RowMatrix probabilities(const ParamVector& x, const RowMatrix& u) const;

  std::shared_ptr<const Dataset> data_;
  std::size_t features_;
  std::size_t classes_;
};

}  // namespace lsgd
