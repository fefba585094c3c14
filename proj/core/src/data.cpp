#include "lsgd/data.hpp"

#include "lsgd/errors.hpp"
#include "lsgd/idx.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace lsgd {

void Dataset::validate() const {
  if (labels.empty()) throw ArgumentError("dataset is empty");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw DimensionError("dataset has " + std::to_string(features.rows()) + " feature rows but " +
                         std::to_string(labels.size()) + " labels");
  }
  if (classes < 1) throw ArgumentError("dataset class count must be positive");
  for (int y : labels) {
    if (y < 0 || y >= classes) {
      throw ArgumentError("label " + std::to_string(y) + " outside [0, " +
                          std::to_string(classes) + ")");
    }
  }
  if (!features.allFinite()) throw ArgumentError("dataset contains non-finite features");
}

std::vector<ClientShard> partition_iid(std::size_t n, std::size_t m, std::uint64_t seed) {
  if (m == 0) throw ArgumentError("partition needs at least one client");
  if (m > n) {
    throw ArgumentError("cannot split " + std::to_string(n) + " samples across " +
                        std::to_string(m) + " clients");
  }
  IndexList perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  CounterEngine engine = RngStream{.seed = seed}.engine(RngPurpose::partition);
  std::shuffle(perm.begin(), perm.end(), engine);

  std::vector<ClientShard> shards(m);
  for (std::size_t i = 0; i < m; ++i) {
    shards[i].client = i;
    shards[i].indices.reserve(n / m + 1);
  }
  for (std::size_t j = 0; j < n; ++j) shards[j % m].indices.push_back(perm[j]);
  for (ClientShard& s : shards) std::sort(s.indices.begin(), s.indices.end());
  return shards;
}

std::vector<ClientShard> partition_shared(std::size_t n, std::size_t m) {
  if (m == 0) throw ArgumentError("partition needs at least one client");
  if (n == 0) throw ArgumentError("partition needs at least one sample");
  IndexList all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<ClientShard> shards(m);
  for (std::size_t i = 0; i < m; ++i) shards[i] = ClientShard{i, all};
  return shards;
}

IndexList sample_batch(const ClientShard& shard, std::size_t batch_size, const RngStream& stream) {
  const std::size_t n = shard.size();
  if (batch_size == 0 || batch_size > n) {
    throw ArgumentError("batch size " + std::to_string(batch_size) + " outside [1, " +
                        std::to_string(n) + "]");
  }
  if (batch_size == n) return shard.indices;
  // Partial Fisher-Yates: the first batch_size slots become a uniform sample.
  IndexList pool = shard.indices;
  CounterEngine engine = stream.engine(RngPurpose::batch);
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(engine)]);
  }
  pool.resize(batch_size);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::unique_ptr<QuadraticProblem> make_synthetic_quadratic(std::size_t d,
                                                           const std::vector<double>& eigenvalues,
                                                           std::uint64_t seed, double noise_std,
                                                           std::size_t samples) {
  require_length(eigenvalues.size(), d, "eigenvalue list");
  for (double l : eigenvalues) {
    if (!(l >= 0.0) || !std::isfinite(l)) {
      throw ArgumentError("requested eigenvalue " + std::to_string(l) + " is not >= 0");
    }
  }
  CounterEngine engine = RngStream{.seed = seed}.engine(RngPurpose::data);
  std::normal_distribution<double> normal;
  const auto n = static_cast<Eigen::Index>(d);
  Matrix g(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = normal(engine);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  // Sign-fix against R's diagonal so Q is Haar distributed.
  const Matrix& r = qr.matrixQR();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  const Eigen::Map<const Vector> lambda(eigenvalues.data(), n);
  Matrix a = q * lambda.asDiagonal() * q.transpose();
  a = (0.5 * (a + a.transpose())).eval();
  Vector b(n);
  for (Eigen::Index i = 0; i < n; ++i) b(i) = normal(engine);
  return std::make_unique<QuadraticProblem>(std::move(a), std::move(b), noise_std, samples);
}

std::vector<double> log_spaced(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0) || !(hi >= lo)) throw ArgumentError("log_spaced needs 0 < lo <= hi");
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

Dataset load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels,
                   const MnistOptions& options) {
  const IdxTensor img = read_idx(images, kIdxImageMagic);
  const IdxTensor lab = read_idx(labels, kIdxLabelMagic);
  if (img.dims[0] != lab.dims[0]) {
    throw FormatError("image count " + std::to_string(img.dims[0]) + " differs from label count " +
                      std::to_string(lab.dims[0]));
  }
  const std::size_t f = options.downsample;
  const std::size_t rows = img.dims[1];
  const std::size_t cols = img.dims[2];
  if (f == 0 || rows % f != 0 || cols % f != 0) {
    throw ArgumentError("downsample factor " + std::to_string(f) + " does not divide " +
                        std::to_string(rows) + "x" + std::to_string(cols));
  }
  std::size_t n = img.dims[0];
  if (options.limit != 0) n = std::min(n, options.limit);
  const std::size_t out_rows = rows / f;
  const std::size_t out_cols = cols / f;
  const double scale = 1.0 / (255.0 * static_cast<double>(f * f));

  Dataset ds;
  ds.classes = 10;
  ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out_rows * out_cols));
  ds.labels.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const std::uint8_t* px = img.data.data() + s * rows * cols;
    for (std::size_t r = 0; r < out_rows; ++r) {
      for (std::size_t c = 0; c < out_cols; ++c) {
        unsigned sum = 0;
        for (std::size_t dr = 0; dr < f; ++dr)
          for (std::size_t dc = 0; dc < f; ++dc) sum += px[(r * f + dr) * cols + c * f + dc];
        ds.features(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(r * out_cols + c)) =
            scale * sum;
      }
    }
    const int y = lab.data[s];
    if (y > 9) throw FormatError("MNIST label " + std::to_string(y) + " is not a digit");
    ds.labels[s] = y;
  }
  ds.validate();
  return ds;
}

Dataset make_synthetic_binary(std::size_t n, std::size_t p, std::uint64_t seed, double separation) {
  if (n == 0 || p == 0) throw ArgumentError("synthetic dataset needs n, p >= 1");
  CounterEngine engine = RngStream{.seed = seed}.engine(RngPurpose::data);
  std::normal_distribution<double> normal;
  Vector mu(static_cast<Eigen::Index>(p));
  for (Eigen::Index j = 0; j < mu.size(); ++j) mu(j) = normal(engine);
  mu *= separation / std::max(mu.norm(), 1e-12);
  Dataset ds;
  ds.classes = 2;
  ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  ds.labels.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const int y = static_cast<int>(s % 2);
    ds.labels[s] = y;
    for (Eigen::Index j = 0; j < mu.size(); ++j) {
      ds.features(static_cast<Eigen::Index>(s), j) = (y == 1 ? mu(j) : -mu(j)) + normal(engine);
    }
  }
  return ds;
}

Dataset make_synthetic_multiclass(std::size_t n, std::size_t p, int c, std::uint64_t seed) {
  if (n == 0 || p == 0 || c < 2) throw ArgumentError("synthetic dataset needs n, p >= 1, c >= 2");
  CounterEngine engine = RngStream{.seed = seed}.engine(RngPurpose::data);
  std::normal_distribution<double> normal;
  RowMatrix centres(c, static_cast<Eigen::Index>(p));
  for (Eigen::Index k = 0; k < centres.rows(); ++k)
    for (Eigen::Index j = 0; j < centres.cols(); ++j) centres(k, j) = 1.5 * normal(engine);
  Dataset ds;
  ds.classes = c;
  ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  ds.labels.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const int y = static_cast<int>(s % static_cast<std::size_t>(c));
    ds.labels[s] = y;
    for (Eigen::Index j = 0; j < centres.cols(); ++j) {
      ds.features(static_cast<Eigen::Index>(s), j) = centres(y, j) + normal(engine);
    }
  }
  return ds;
}

}  // namespace lsgd
