#pragma once

#include "lsgd/data.hpp"
#include "lsgd/fedsim.hpp"
#include "lsgd/linalg.hpp"
#include "lsgd/problem.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lsgd {

/// n^s(x_k) = grad f(x_k) - grad f(x_0) - H(x_0)(x_k - x_0), all full-batch
/// over `batch`. Results at the rounding level of the three terms are
/// returned as exact zeros.
Vector residue(const LossProblem& problem, const ParamVector& x0, const ParamVector& xk,
               IndexSpan batch);
Vector residue(const LossProblem& problem, const ParamVector& x0, const ParamVector& xk);

/// grad_norm / residue_norm; +infinity when residue_norm < 1e-15.
double assumption3_ratio(double grad_norm, double residue_norm);

struct SampleStats {
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct ResidueReport {
  std::size_t round = 0;
  std::size_t iteration = 0;
  std::size_t trials = 0;
  std::size_t excluded_trials = 0;
  double grad_norm = 0.0;
  double residue_norm = 0.0;
  /// +infinity when the estimated residue vanishes.
  double ratio = 0.0;
  SampleStats trial_residue_norm;
};

struct ResidueEstimate {
  Vector mean_residue;
  ResidueReport report;
};

struct ResidueRequest {
  std::size_t iteration = 0;
  double learning_rate = 0.01;
  std::size_t batch_size = 1;
  std::size_t trials = 500;
  std::uint64_t seed = 0;
  /// Round label stored in the report.
  std::size_t round = 0;
  unsigned threads = 1;
};

/// Monte-Carlo estimate of E[n^s(x_{t,i,k})] on the shard's loss: each trial
/// runs k local SGD steps from x0 with its own stream, and residues are
/// averaged in trial order. A diverging trial is excluded; more than 10%
/// excluded throws DivergenceError.
ResidueEstimate estimate_residue_expectation(const LossProblem& problem,
                                             const ClientShard& shard, const ParamVector& x0,
                                             const ResidueRequest& request);

struct LearningRateCondition {
  std::size_t local_steps = 0;
  double eta = 0.0;
  double n = 1.0;
  double lipschitz = 0.0;
  /// 1 / (N L)
  double bound = 0.0;
  bool satisfied = false;
  /// K*eta - 1/(N L)
  double margin = 0.0;
};

LearningRateCondition check_learning_rate_condition(std::size_t local_steps, double eta,
                                                    double n, double lipschitz);

struct AssumptionAudit {
  double g_hat = 0.0;
  double sigma1_sq_hat = 0.0;
  double l_hat = 0.0;
  LearningRateCondition lr_condition;
  /// Max |Pearson correlation| between centred updates of two clients.
  std::optional<double> max_client_correlation;
  /// -1/(m-1): the value centring alone induces for independent clients.
  std::optional<double> correlation_baseline;
  std::vector<std::string> notices;
};

AssumptionAudit audit_assumptions(std::span<const RoundTrace> traces,
                                  std::span<const Vector> eigenvalues_per_round,
                                  std::size_t local_steps, double eta, double n);

/// Largest |Pearson correlation| across pairs of mean-centred client updates.
std::optional<double> max_pairwise_correlation(std::span<const Vector> client_deltas);

}  // namespace lsgd
