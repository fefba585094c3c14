#pragma once

#include "lsgd/data.hpp"
#include "lsgd/linalg.hpp"
#include "lsgd/problem.hpp"
#include "lsgd/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

namespace lsgd {

enum class OptimizerKind { lsgd, sgd, gd, newton };

std::string_view to_string(OptimizerKind kind);
std::optional<OptimizerKind> parse_optimizer(std::string_view name);

enum class PartitionMode { iid, shared };

/// Hyperparameters of one federated run.
struct FedRunConfig {
  OptimizerKind optimizer = OptimizerKind::lsgd;
  std::size_t clients = 1;
  std::size_t local_steps = 1;
  std::size_t rounds = 1;
  double learning_rate = 0.01;
  std::size_t batch_size = 1;
  /// Use each client's whole shard for every local gradient.
  bool full_batch = false;
  std::uint64_t seed = 0;
  PartitionMode partition = PartitionMode::iid;

  /// The big-batch SGD baseline draws baseline_batch samples per round
  /// (split evenly across clients) and takes one step of this size.
  std::size_t baseline_batch = 1000;
  double baseline_learning_rate = 0.1;

  /// Worker threads for client updates; 0 picks hardware_concurrency().
  unsigned threads = 1;

  /// Rounds whose per-client updates are kept in the trace.
  std::set<std::size_t> record_rounds;
  bool record_all_rounds = false;

  /// Throws ArgumentError when an invariant (m, K, T, eta, batch >= 1) fails.
  void validate() const;

  bool records(std::size_t round) const {
    return record_all_rounds || record_rounds.contains(round);
  }
};

struct LocalUpdate {
  /// Sum over steps of eta * stochastic gradient, i.e. x_t - x_{t,i,K}.
  Vector delta;
  std::vector<double> step_grad_norms;
  /// Filled only when requested.
  std::vector<Vector> step_grads;
};

/// K local SGD steps from x_t on one shard.
/// Throws DivergenceError naming (round, client, step) on a non-finite gradient.
LocalUpdate local_client_update(const LossProblem& problem, const ClientShard& shard,
                                const ParamVector& x_t, std::size_t local_steps,
                                double learning_rate, std::size_t batch_size,
                                const RngStream& stream, bool full_batch = false,
                                bool keep_step_grads = false);

/// Component-wise mean, summed in ascending client order.
Vector aggregate(std::span<const Vector> client_deltas);

/// ||K*eta*grad - delta||^2.
double sgd_lsgd_gap(const Vector& full_grad, std::size_t local_steps, double learning_rate,
                    const Vector& delta);

struct NewtonStep {
  Vector step;
  std::size_t rank = 0;
  /// ||H step - grad|| / ||grad||.
  double residual = 0.0;
  /// Fraction of ||grad|| lying in the numerical null space of H.
  double null_space_fraction = 0.0;
  /// Rank-deficient H with a gradient that is not in its range.
  bool rank_deficient = false;
};

/// Pseudo-inverse Newton step H^+ grad from a symmetric eigendecomposition,
/// treating |lambda| <= 1e-10 * max|lambda| as zero.
NewtonStep newton_step(const LossProblem& problem, const ParamVector& x);
NewtonStep newton_step(const Matrix& hessian, const Vector& grad);

struct RoundTrace {
  std::size_t round = 0;
  ParamVector x;
  /// Empty unless the round was recorded.
  std::vector<Vector> client_deltas;
  Vector delta;
  Vector full_grad;
  double loss = 0.0;
  std::optional<double> test_accuracy;
  double gap_eq3 = 0.0;
  /// Largest stochastic-gradient norm seen by any client this round.
  double max_step_grad_norm = 0.0;
  /// Trace of the sample covariance of the client updates (0 when m == 1).
  double client_delta_variance = 0.0;
};

struct TrainingResult {
  std::vector<RoundTrace> traces;
  ParamVector final_x;
};

using Evaluator = std::function<double(const ParamVector&)>;

/// Runs T rounds from x0. Clients may run concurrently; aggregation order is
/// fixed so results do not depend on scheduling.
TrainingResult run_training(const LossProblem& problem, const FedRunConfig& config,
                            const ParamVector& x0, const Evaluator& test_accuracy = {});

/// Shards used by run_training for a given config.
std::vector<ClientShard> make_shards(const LossProblem& problem, const FedRunConfig& config);

/// Trace of the sample covariance (divisor m - 1) of a set of vectors.
double sample_variance_trace(std::span<const Vector> vectors);

}  // namespace lsgd
