#pragma once

#include "lsgd/app/config.hpp"
#include "lsgd/data.hpp"
#include "lsgd/fedsim.hpp"
#include "lsgd/problem.hpp"
#include "lsgd/residue.hpp"
#include "lsgd/spectral.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <vector>

namespace lsgd::app {

struct RunOptions {
  std::filesystem::path out;
  /// Suppresses the timestamp comment in SVG output.
  bool deterministic = false;
  /// Progress messages; null for silence.
  std::ostream* log = nullptr;
};

struct ProblemBundle {
  std::shared_ptr<const Dataset> train;
  std::shared_ptr<const Dataset> test;
  std::unique_ptr<LossProblem> problem;
  /// Test accuracy for softmax problems with a test split.
  Evaluator accuracy;
};

ProblemBundle build_problem(const ExperimentConfig& config);
ParamVector initial_point(const ExperimentConfig& config, std::size_t dim);

/// Run settings for one optimizer of the experiment.
FedRunConfig run_config(const ExperimentConfig& config, OptimizerKind kind);

/// Step count and step size that define one round's update for `kind`.
struct EffectiveSchedule {
  std::size_t local_steps;
  double learning_rate;
};
EffectiveSchedule effective_schedule(const FedRunConfig& run);

struct OptimizerRun {
  OptimizerKind kind;
  TrainingResult result;
};

struct TrainOutcome {
  std::vector<OptimizerRun> runs;
};

/// Trains every configured optimizer; writes metrics_<opt>.csv,
/// train_summary.json, loss_curve.svg and checkpoints of the first optimizer.
TrainOutcome cmd_train(const ExperimentConfig& config, const RunOptions& options);

/// Spectral analysis of each diagnostics round from its checkpoint.
std::vector<SpectralReport> cmd_diagnose(const ExperimentConfig& config, const RunOptions& options);

/// Monte-Carlo residue ratios for every (round, k) pair.
std::vector<ResidueReport> cmd_residue(const ExperimentConfig& config, const RunOptions& options);

struct AuditOutcome {
  AssumptionAudit audit;
  /// Number of leading rounds over which the training loss strictly decreased.
  std::size_t loss_decreasing_rounds = 0;
};

AuditOutcome cmd_audit(const ExperimentConfig& config, const RunOptions& options);

/// train, diagnose, residue and audit in sequence.
void cmd_report(const ExperimentConfig& config, const RunOptions& options);

}  // namespace lsgd::app
