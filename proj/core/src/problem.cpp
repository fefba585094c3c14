#include "lsgd/problem.hpp"

#include "lsgd/data.hpp"
#include "lsgd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace lsgd {

std::string_view to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::quadratic: return "quadratic";
    case ProblemKind::logistic: return "logistic";
    case ProblemKind::softmax: return "softmax";
  }
  return "unknown";
}

LossProblem::LossProblem(std::size_t dim, std::size_t samples) : dim_(dim), all_(samples) {
  if (dim == 0) throw ArgumentError("problem dimension must be positive");
  if (samples == 0) throw ArgumentError("problem needs at least one sample");
  std::iota(all_.begin(), all_.end(), std::size_t{0});
}

void LossProblem::check(const ParamVector& x, IndexSpan batch) const {
  require_length(static_cast<std::size_t>(x.size()), dim_, "parameter vector");
  if (batch.empty()) throw DimensionError("empty batch");
  if (is_whole_dataset(batch)) return;
  const std::size_t n = all_.size();
  for (std::size_t i : batch) {
    if (i >= n) {
      throw DimensionError("batch index " + std::to_string(i) + " out of range for " +
                           std::to_string(n) + " samples");
    }
  }
}

double LossProblem::loss(const ParamVector& x, IndexSpan batch) const {
  check(x, batch);
  return eval_loss(x, batch);
}

Vector LossProblem::grad(const ParamVector& x, IndexSpan batch) const {
  check(x, batch);
  return eval_grad(x, batch);
}

Vector LossProblem::stochastic_grad(const ParamVector& x, IndexSpan batch,
                                    CounterEngine& noise) const {
  Vector g = grad(x, batch);
  add_gradient_noise(g, noise);
  return g;
}

Matrix LossProblem::hessian(const ParamVector& x, IndexSpan batch) const {
  if (dim_ > hessian_budget_) {
    throw CapacityError("dense Hessian of dimension " + std::to_string(dim_) +
                        " exceeds the budget of " + std::to_string(hessian_budget_));
  }
  check(x, batch);
  return eval_hessian(x, batch);
}

Vector LossProblem::hvp(const ParamVector& x, IndexSpan batch, const Vector& v) const {
  check(x, batch);
  require_length(static_cast<std::size_t>(v.size()), dim_, "hvp direction");
  return eval_hvp(x, batch, v);
}

// ---------------------------------------------------------------------------
// Quadratic

QuadraticProblem::QuadraticProblem(Matrix a, Vector b, double noise_std, std::size_t samples)
    : LossProblem(static_cast<std::size_t>(b.size()), samples),
      a_(std::move(a)),
      b_(std::move(b)),
      noise_std_(noise_std) {
  if (a_.rows() != a_.cols() || a_.rows() != b_.size()) {
    throw DimensionError("quadratic: A must be d x d with d = len(b)");
  }
  if (!a_.allFinite() || !b_.allFinite()) throw ArgumentError("quadratic: non-finite entries");
  if (!(noise_std_ >= 0.0)) throw ArgumentError("quadratic: noise_std must be >= 0");
  const double scale = std::max(a_.cwiseAbs().maxCoeff(), 1e-300);
  if ((a_ - a_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ArgumentError("quadratic: A is not symmetric");
  }
  a_ = (0.5 * (a_ + a_.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(a_, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw ArgumentError("quadratic: A has a negative eigenvalue");
  }
}

double QuadraticProblem::eval_loss(const ParamVector& x, IndexSpan) const {
  return 0.5 * x.dot(a_ * x) - b_.dot(x);
}

Vector QuadraticProblem::eval_grad(const ParamVector& x, IndexSpan) const {
  return a_ * x - b_;
}

Matrix QuadraticProblem::eval_hessian(const ParamVector&, IndexSpan) const { return a_; }

Vector QuadraticProblem::eval_hvp(const ParamVector&, IndexSpan, const Vector& v) const {
  return a_ * v;
}

void QuadraticProblem::add_gradient_noise(Vector& g, CounterEngine& noise) const {
  if (noise_std_ == 0.0) return;
  std::normal_distribution<double> normal(0.0, noise_std_);
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) += normal(noise);
}

// ---------------------------------------------------------------------------
// Logistic

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

RowMatrix gather_rows(const RowMatrix& m, IndexSpan rows) {
  RowMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(rows[r]));
  }
  return out;
}

}  // namespace

LogisticProblem::LogisticProblem(std::shared_ptr<const Dataset> data)
    : LossProblem(data ? data->feature_dim() : 0, data ? data->size() : 0),
      data_(std::move(data)) {
  data_->validate();
  if (data_->classes != 2) throw ArgumentError("logistic problem needs a binary dataset");
}

double LogisticProblem::eval_loss(const ParamVector& x, IndexSpan batch) const {
  double total = 0.0;
  for (std::size_t s : batch) {
    const auto row = static_cast<Eigen::Index>(s);
    const double z = data_->features.row(row).dot(x);
    total += softplus(z) - (data_->labels[s] == 1 ? z : 0.0);
  }
  return total / static_cast<double>(batch.size());
}

Vector LogisticProblem::eval_grad(const ParamVector& x, IndexSpan batch) const {
  Vector g = Vector::Zero(x.size());
  for (std::size_t s : batch) {
    const auto row = static_cast<Eigen::Index>(s);
    const double z = data_->features.row(row).dot(x);
    g += (sigmoid(z) - (data_->labels[s] == 1 ? 1.0 : 0.0)) *
         data_->features.row(row).transpose();
  }
  return g / static_cast<double>(batch.size());
}

Matrix LogisticProblem::eval_hessian(const ParamVector& x, IndexSpan batch) const {
  const RowMatrix u = gather_rows(data_->features, batch);
  const Vector z = u * x;
  Vector w(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double p = sigmoid(z(i));
    w(i) = p * (1.0 - p);
  }
  Matrix h = u.transpose() * w.asDiagonal() * u;
  return h / static_cast<double>(batch.size());
}

Vector LogisticProblem::eval_hvp(const ParamVector& x, IndexSpan batch, const Vector& v) const {
  Vector out = Vector::Zero(x.size());
  for (std::size_t s : batch) {
    const auto row = static_cast<Eigen::Index>(s);
    const double p = sigmoid(data_->features.row(row).dot(x));
    out += p * (1.0 - p) * data_->features.row(row).dot(v) * data_->features.row(row).transpose();
  }
  return out / static_cast<double>(batch.size());
}

// ---------------------------------------------------------------------------
// Softmax

SoftmaxProblem::SoftmaxProblem(std::shared_ptr<const Dataset> data)
    : LossProblem(data ? static_cast<std::size_t>(data->classes) * (data->feature_dim() + 1) : 0,
                  data ? data->size() : 0),
      data_(std::move(data)),
      features_(data_->feature_dim()),
      classes_(static_cast<std::size_t>(data_->classes)) {
  data_->validate();
  if (classes_ < 2) throw ArgumentError("softmax problem needs at least two classes");
}

RowMatrix SoftmaxProblem::augmented_batch(IndexSpan batch) const {
  const auto p = static_cast<Eigen::Index>(features_);
  RowMatrix u(static_cast<Eigen::Index>(batch.size()), p + 1);
  if (is_whole_dataset(batch)) {
    u.leftCols(p) = data_->features;
  } else {
    for (std::size_t r = 0; r < batch.size(); ++r) {
      u.row(static_cast<Eigen::Index>(r)).head(p) =
          data_->features.row(static_cast<Eigen::Index>(batch[r]));
    }
  }
  u.col(p).setOnes();
  return u;
}

RowMatrix SoftmaxProblem::probabilities(const ParamVector& x, const RowMatrix& u) const {
  const auto c = static_cast<Eigen::Index>(classes_);
  Eigen::Map<const RowMatrix> w(x.data(), c, u.cols());
  RowMatrix z = u * w.transpose();
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double zmax = z.row(r).maxCoeff();
    z.row(r) = (z.row(r).array() - zmax).exp();
    z.row(r) /= z.row(r).sum();
  }
  return z;
}

double SoftmaxProblem::eval_loss(const ParamVector& x, IndexSpan batch) const {
  const RowMatrix u = augmented_batch(batch);
  const auto c = static_cast<Eigen::Index>(classes_);
  Eigen::Map<const RowMatrix> w(x.data(), c, u.cols());
  const RowMatrix z = u * w.transpose();
  double total = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double zmax = z.row(r).maxCoeff();
    const double lse = zmax + std::log((z.row(r).array() - zmax).exp().sum());
    total += lse - z(r, data_->labels[batch[static_cast<std::size_t>(r)]]);
  }
  return total / static_cast<double>(batch.size());
}

Vector SoftmaxProblem::eval_grad(const ParamVector& x, IndexSpan batch) const {
  const RowMatrix u = augmented_batch(batch);
  RowMatrix p = probabilities(x, u);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    p(r, data_->labels[batch[static_cast<std::size_t>(r)]]) -= 1.0;
  }
  Vector g(static_cast<Eigen::Index>(dim()));
  Eigen::Map<RowMatrix> gm(g.data(), p.cols(), u.cols());
  gm.noalias() = p.transpose() * u;
  g /= static_cast<double>(batch.size());
  return g;
}

Matrix SoftmaxProblem::eval_hessian(const ParamVector& x, IndexSpan batch) const {
  const RowMatrix u = augmented_batch(batch);
  const RowMatrix p = probabilities(x, u);
  const auto c = static_cast<Eigen::Index>(classes_);
  const Eigen::Index q = u.cols();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  Matrix h(c * q, c * q);
  Vector weight(u.rows());
  for (Eigen::Index a = 0; a < c; ++a) {
    for (Eigen::Index b = a; b < c; ++b) {
      weight = -p.col(a).cwiseProduct(p.col(b));
      if (a == b) weight += p.col(a);
      Matrix block = u.transpose() * weight.asDiagonal() * u;
      block *= inv_n;
      h.block(a * q, b * q, q, q) = block;
      if (a != b) h.block(b * q, a * q, q, q) = block.transpose();
    }
  }
  return h;
}

Vector SoftmaxProblem::eval_hvp(const ParamVector& x, IndexSpan batch, const Vector& v) const {
  const RowMatrix u = augmented_batch(batch);
  const RowMatrix p = probabilities(x, u);
  const auto c = static_cast<Eigen::Index>(classes_);
  Eigen::Map<const RowMatrix> vm(v.data(), c, u.cols());
  // s = V u per sample; J s = p .* s - p (p . s)
  RowMatrix s = u * vm.transpose();
  RowMatrix ps = p.cwiseProduct(s);
  const Vector dots = ps.rowwise().sum();
  RowMatrix js = ps - (p.array().colwise() * dots.array()).matrix();
  Vector out(static_cast<Eigen::Index>(dim()));
  Eigen::Map<RowMatrix> om(out.data(), c, u.cols());
  om.noalias() = js.transpose() * u;
  out /= static_cast<double>(batch.size());
  return out;
}

double SoftmaxProblem::accuracy(const ParamVector& x, const Dataset& data) const {
  require_length(static_cast<std::size_t>(x.size()), dim(), "parameter vector");
  require_length(data.feature_dim(), features_, "dataset features");
  const auto c = static_cast<Eigen::Index>(classes_);
  const auto p = static_cast<Eigen::Index>(features_);
  Eigen::Map<const RowMatrix> w(x.data(), c, p + 1);
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
    Vector z = w.leftCols(p) * data.features.row(r).transpose() + w.col(p);
    Eigen::Index arg = 0;
    z.maxCoeff(&arg);
    if (arg == data.labels[static_cast<std::size_t>(r)]) ++correct;
  }
  return data.size() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace lsgd
