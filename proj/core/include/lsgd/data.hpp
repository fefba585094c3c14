#pragma once

#include "lsgd/linalg.hpp"
#include "lsgd/problem.hpp"
#include "lsgd/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

namespace lsgd {

/// n samples with p real features each and integer labels in [0, classes).
struct Dataset {
  RowMatrix features;
  std::vector<int> labels;
  int classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(features.cols()); }

  /// Throws ArgumentError unless labels are in range, n >= 1 and all
  /// features are finite.
  void validate() const;
};

/// Sorted, duplicate-free indices into the parent dataset owned by one client.
struct ClientShard {
  std::size_t client = 0;
  IndexList indices;

  std::size_t size() const { return indices.size(); }
};

/// Deals a seeded uniform permutation of [0, n) round-robin to m clients.
/// Shards are disjoint, cover every sample and differ in size by at most one.
std::vector<ClientShard> partition_iid(std::size_t n, std::size_t m, std::uint64_t seed);

/// Every client receives all n samples. Used to build runs whose clients are
/// statistically identical.
std::vector<ClientShard> partition_shared(std::size_t n, std::size_t m);

/// Draws batch_size distinct indices uniformly from the shard. The result is
/// sorted and depends only on the stream position.
IndexList sample_batch(const ClientShard& shard, std::size_t batch_size, const RngStream& stream);

/// Quadratic with Hessian Q diag(eigenvalues) Q^T for a seeded random
/// orthonormal Q, and a seeded standard normal b.
std::unique_ptr<QuadraticProblem> make_synthetic_quadratic(std::size_t d,
                                                           const std::vector<double>& eigenvalues,
                                                           std::uint64_t seed,
                                                           double noise_std = 0.0,
                                                           std::size_t samples = 1);

/// `count` values spaced evenly in log10 between lo and hi inclusive.
std::vector<double> log_spaced(double lo, double hi, std::size_t count);

struct MnistOptions {
  /// 1 keeps 28x28 pixels; 2 averages 2x2 blocks to 14x14.
  std::size_t downsample = 1;
  /// Keep only the first `limit` samples when nonzero.
  std::size_t limit = 0;
};

/// Loads IDX image/label files into a Dataset with features in [0, 1].
Dataset load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels,
                   const MnistOptions& options = {});

/// Two isotropic Gaussian clouds with means +/- mu in p dimensions, labels {0, 1}.
Dataset make_synthetic_binary(std::size_t n, std::size_t p, std::uint64_t seed,
                              double separation = 1.0);

/// c Gaussian clusters in p dimensions with seeded random centres.
Dataset make_synthetic_multiclass(std::size_t n, std::size_t p, int c, std::uint64_t seed);

}  // namespace lsgd
