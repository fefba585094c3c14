#include "lsgd/app/cli.hpp"

#include "lsgd/app/commands.hpp"
#include "lsgd/app/config.hpp"
#include "lsgd/errors.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace lsgd::app {
namespace {

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::size_t> rounds;
  std::optional<std::size_t> trials;
  bool deterministic = false;
  bool quiet = false;
};

void add_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "experiment file (TOML)")->required();
  cmd->add_option("--out", f.out, "output directory (default: [output] directory)");
  cmd->add_option("--seed", f.seed, "override [federation] seed");
  cmd->add_option("--rounds", f.rounds, "rounds to analyze, e.g. 10,20")->delimiter(',');
  cmd->add_option("--trials", f.trials, "override [residue] trials");
  cmd->add_flag("--deterministic", f.deterministic, "omit timestamps from SVG output");
  cmd->add_flag("--quiet", f.quiet, "no progress messages");
}

std::string ratio_text(double r) { return std::isinf(r) ? "inf" : std::to_string(r); }

int dispatch(const std::string& command, const Flags& f, std::ostream& out, std::ostream& err) {
  ExperimentConfig config = load_config(f.config);
  if (f.seed) config.federation.seed = *f.seed;
  if (f.trials) config.residue_trials = *f.trials;
  if (!f.rounds.empty()) {
    if (command == "residue") {
      config.residue_rounds = f.rounds;
    } else {
      config.diagnostics_rounds = f.rounds;
    }
  }
  config.validate();
  RunOptions opts{.out = f.out.empty() ? config.output_dir : std::filesystem::path(f.out),
                  .deterministic = f.deterministic,
                  .log = f.quiet ? nullptr : &err};

  if (command == "train") {
    const TrainOutcome t = cmd_train(config, opts);
    for (const OptimizerRun& r : t.runs) {
      const RoundTrace& last = r.result.traces.back();
      out << to_string(r.kind) << ": loss " << r.result.traces.front().loss << " at round 0, "
          << last.loss << " at round " << last.round << "\n";
    }
  } else if (command == "diagnose") {
    for (const SpectralReport& r : cmd_diagnose(config, opts)) {
      out << "round " << r.round << ": eigenvalues [" << r.eigen_min << ", " << r.eigen_max
          << "], CPDF at median gradient " << r.cpdf_gradient_at_median << " update "
          << r.cpdf_update_at_median << "\n";
    }
  } else if (command == "residue") {
    for (const ResidueReport& r : cmd_residue(config, opts)) {
      out << "round " << r.round << " k " << r.iteration << ": ratio " << ratio_text(r.ratio)
          << "\n";
    }
  } else if (command == "audit") {
    const AuditOutcome a = cmd_audit(config, opts);
    const LearningRateCondition& lr = a.audit.lr_condition;
    out << "learning-rate condition " << (lr.satisfied ? "satisfied" : "violated")
        << " (K*eta = " << static_cast<double>(lr.local_steps) * lr.eta << ", 1/(N L) = "
        << lr.bound << ", margin " << lr.margin << ")\n";
  } else {
    cmd_report(config, opts);
  }
  out << "artifacts in " << opts.out.string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated local-SGD simulator with Hessian-spectrum diagnostics", "lsgd"};
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<const char*, const char*>> commands{
      {"train", "run the configured optimizers and write metrics and checkpoints"},
      {"diagnose", "Hessian spectrum, CPDF and SOE tables at the diagnostics rounds"},
      {"residue", "Monte-Carlo gradient-estimation residue ratios"},
      {"audit", "empirical assumption checks and the learning-rate condition"},
      {"report", "train, diagnose, residue and audit in one go"},
  };
  for (const auto& [name, help] : commands) add_flags(app.add_subcommand(name, help), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return dispatch(command, flags, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CapacityError& e) {
    err << "capacity error: " << e.what() << "\n";
    return kExitCapacity;
  } catch (const DivergenceError& e) {
    err << "numerical divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace lsgd::app
