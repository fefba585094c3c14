#pragma once

#include "lsgd/errors.hpp"
#include "lsgd/fedsim.hpp"
#include "lsgd/problem.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lsgd::app {

/// Unreadable, malformed or invalid configuration; maps to exit code 2.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::size_t line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

enum class DatasetSource { synthetic, mnist };
enum class InitMode { zeros, normal };

struct ProblemSpec {
  ProblemKind kind = ProblemKind::quadratic;
  std::uint64_t seed = 0;

  // quadratic
  std::size_t dim = 10;
  std::vector<double> eigenvalues;  // explicit spectrum; empty means log-spaced
  double eigen_min = 1e-3;
  double eigen_max = 1.0;
  double noise_std = 0.0;
  std::size_t samples = 1;

  // logistic / softmax
  DatasetSource dataset = DatasetSource::synthetic;
  std::size_t features = 10;
  int classes = 10;
  double separation = 1.0;
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  std::size_t downsample = 1;
  std::size_t limit = 0;

  std::size_t hessian_budget = kDefaultHessianBudget;
};

struct ExperimentConfig {
  ProblemSpec problem;

  FedRunConfig federation;
  /// Optimizers compared by `train`; the first one feeds the diagnostics.
  std::vector<OptimizerKind> optimizers{OptimizerKind::lsgd};
  InitMode init = InitMode::zeros;
  double init_scale = 0.01;

  std::vector<std::size_t> diagnostics_rounds;
  std::size_t cpdf_points = 200;
  bool checkpoint_all = false;
  /// The constant N >= 1 in the learning-rate condition K*eta <= 1/(N L).
  double condition_n = 1.0;

  std::vector<std::size_t> residue_iterations{10, 30, 100, 300};
  std::vector<std::size_t> residue_rounds;  // empty means diagnostics_rounds
  std::size_t residue_trials = 500;
  std::size_t residue_client = 0;

  std::filesystem::path output_dir = "out";
  bool svg = true;

  /// Exact bytes of the file the config was read from.
  std::string source;
  std::string source_name;

  OptimizerKind primary() const { return optimizers.front(); }
  const std::vector<std::size_t>& effective_residue_rounds() const {
    return residue_rounds.empty() ? diagnostics_rounds : residue_rounds;
  }

  /// Throws ConfigError when cross-field invariants fail.
  void validate() const;
};

/// Parses TOML text. Relative data paths are resolved against `base_dir`;
/// the output directory is kept as written.
/// Unknown sections or keys are errors naming the line. Cross-field checks
/// are left to validate() so command-line overrides can apply first.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace lsgd::app
