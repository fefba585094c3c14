#include "lsgd/app/commands.hpp"

#include "lsgd/app/artifacts.hpp"
#include "lsgd/app/svg.hpp"
#include "lsgd/errors.hpp"
#include "lsgd/rng.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <ostream>
#include <random>
#include <set>

namespace lsgd::app {

namespace fs = std::filesystem;

namespace {

void say(const RunOptions& o, const std::string& msg) {
  if (o.log != nullptr) *o.log << msg << '\n';
}

std::optional<std::string> timestamp(const RunOptions& o) {
  if (o.deterministic) return std::nullopt;
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

std::string num(double v) { return format_number(v); }
std::string num(std::size_t v) { return std::to_string(v); }

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::set<std::size_t> checkpoint_rounds(const ExperimentConfig& c) {
  std::set<std::size_t> out(c.diagnostics_rounds.begin(), c.diagnostics_rounds.end());
  const auto& r = c.effective_residue_rounds();
  out.insert(r.begin(), r.end());
  return out;
}

std::string spectral_name(std::size_t t) { return "spectral_round_" + std::to_string(t) + ".json"; }

Json spectral_json(const SpectralReport& r) {
  Json j;
  j["round"] = r.round;
  j["eigen_backend"] = std::string(to_string(r.eigen_backend));
  j["eta"] = r.eta;
  j["local_steps"] = r.local_steps;
  j["eigen_min"] = r.eigen_min;
  j["eigen_max"] = r.eigen_max;
  j["median_eigenvalue"] = r.median_eigenvalue;
  j["eigenvalues"] = to_json(r.eigenvalues);
  j["energy_grad"] = to_json(r.energy_grad);
  j["energy_update"] = to_json(r.energy_update);
  j["cpdf_gradient_at_median"] = r.cpdf_gradient_at_median;
  j["cpdf_update_at_median"] = r.cpdf_update_at_median;
  j["predicted_update"] = to_json(r.predicted_update);
  j["predicted_newton"] = to_json(r.predicted_newton);
  j["measured_update"] = to_json(r.measured_update);
  j["update_relative_error"] = finite_or_null(r.update_relative_error);
  j["soe"] = to_json(r.soe);
  j["predicted_u_soe"] = r.predicted_u_soe;
  j["measured_u_soe"] = r.measured_u_soe;
  j["gap_eq3"] = r.gap_eq3;
  return j;
}

Json residue_json(const ResidueReport& r) {
  Json j;
  j["round"] = r.round;
  j["iteration"] = r.iteration;
  j["trials"] = r.trials;
  j["excluded_trials"] = r.excluded_trials;
  j["grad_norm"] = r.grad_norm;
  j["residue_norm"] = r.residue_norm;
  j["ratio"] = finite_or_null(r.ratio);
  j["ratio_infinite"] = std::isinf(r.ratio);
  j["trial_residue_norm"] = {{"mean", r.trial_residue_norm.mean},
                             {"stddev", r.trial_residue_norm.stddev},
                             {"min", r.trial_residue_norm.min},
                             {"max", r.trial_residue_norm.max}};
  return j;
}

}  // namespace

ProblemBundle build_problem(const ExperimentConfig& config) {
  const ProblemSpec& p = config.problem;
  ProblemBundle b;
  if (p.kind == ProblemKind::quadratic) {
    const std::vector<double> eigs =
        p.eigenvalues.empty() ? log_spaced(p.eigen_min, p.eigen_max, p.dim) : p.eigenvalues;
    b.problem = make_synthetic_quadratic(p.dim, eigs, p.seed, p.noise_std, p.samples);
  } else {
    if (p.dataset == DatasetSource::mnist) {
      const MnistOptions opts{.downsample = p.downsample, .limit = p.limit};
      b.train = std::make_shared<const Dataset>(load_mnist(p.train_images, p.train_labels, opts));
      if (!p.test_images.empty()) {
        b.test = std::make_shared<const Dataset>(load_mnist(p.test_images, p.test_labels, opts));
      }
    } else if (p.kind == ProblemKind::logistic) {
      b.train = std::make_shared<const Dataset>(
          make_synthetic_binary(p.samples, p.features, p.seed, p.separation));
    } else {
      b.train = std::make_shared<const Dataset>(
          make_synthetic_multiclass(p.samples, p.features, p.classes, p.seed));
    }
    if (p.kind == ProblemKind::logistic) {
      b.problem = std::make_unique<LogisticProblem>(b.train);
    } else {
      auto softmax = std::make_unique<SoftmaxProblem>(b.train);
      if (b.test) {
        const SoftmaxProblem* raw = softmax.get();
        std::shared_ptr<const Dataset> test = b.test;
        b.accuracy = [raw, test](const ParamVector& x) { return raw->accuracy(x, *test); };
      }
      b.problem = std::move(softmax);
    }
  }
  b.problem->set_hessian_budget(p.hessian_budget);
  return b;
}

ParamVector initial_point(const ExperimentConfig& config, std::size_t dim) {
  ParamVector x = ParamVector::Zero(static_cast<Eigen::Index>(dim));
  if (config.init == InitMode::normal) {
    CounterEngine eng = RngStream{.seed = config.federation.seed}.engine(RngPurpose::init);
    std::normal_distribution<double> n(0.0, config.init_scale);
    for (double& v : x) v = n(eng);
  }
  return x;
}

FedRunConfig run_config(const ExperimentConfig& config, OptimizerKind kind) {
  FedRunConfig run = config.federation;
  run.optimizer = kind;
  run.record_rounds.clear();
  run.record_all_rounds = false;
  if (kind == config.primary()) {
    run.record_all_rounds = config.checkpoint_all;
    for (std::size_t t : checkpoint_rounds(config)) run.record_rounds.insert(t);
  }
  return run;
}

EffectiveSchedule effective_schedule(const FedRunConfig& run) {
  switch (run.optimizer) {
    case OptimizerKind::lsgd: return {run.local_steps, run.learning_rate};
    case OptimizerKind::sgd: return {1, run.baseline_learning_rate};
    case OptimizerKind::gd:
    case OptimizerKind::newton: return {1, run.learning_rate};
  }
  return {run.local_steps, run.learning_rate};
}

TrainOutcome cmd_train(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const ProblemBundle bundle = build_problem(config);
  const LossProblem& problem = *bundle.problem;
  const ParamVector x0 = initial_point(config, problem.dim());
  TrainOutcome outcome;
  std::vector<std::string> files;
  Json summary;
  summary["problem"] = std::string(to_string(problem.kind()));
  summary["dim"] = problem.dim();
  summary["samples"] = problem.sample_count();
  summary["primary"] = std::string(to_string(config.primary()));
  std::vector<Series> curves;
  bool positive = true;

  for (OptimizerKind kind : config.optimizers) {
    const FedRunConfig run = run_config(config, kind);
    const std::string name(to_string(kind));
    say(options, "train: " + name + " for " + std::to_string(run.rounds) + " rounds");
    TrainingResult result = run_training(problem, run, x0, bundle.accuracy);

    CsvTable metrics({"round", "loss", "grad_norm", "delta_norm", "gap_eq3", "test_accuracy"});
    Json rounds = Json::array();
    Series curve{.label = name, .x = {}, .y = {}};
    for (const RoundTrace& t : result.traces) {
      metrics.add({num(t.round), num(t.loss), num(t.full_grad.norm()), num(t.delta.norm()),
                   num(t.gap_eq3), t.test_accuracy ? num(*t.test_accuracy) : std::string()});
      Json r;
      r["round"] = t.round;
      r["loss"] = t.loss;
      r["grad_norm"] = t.full_grad.norm();
      r["delta_norm"] = t.delta.norm();
      r["gap_eq3"] = t.gap_eq3;
      r["max_step_grad_norm"] = t.max_step_grad_norm;
      r["client_delta_variance"] = t.client_delta_variance;
      if (t.test_accuracy) r["test_accuracy"] = *t.test_accuracy;
      rounds.push_back(std::move(r));
      curve.x.push_back(static_cast<double>(t.round));
      curve.y.push_back(t.loss);
      positive &= t.loss > 0.0;
    }
    const std::string csv = "metrics_" + name + ".csv";
    metrics.write(options.out / csv);
    files.push_back(csv);
    curves.push_back(std::move(curve));

    const EffectiveSchedule sched = effective_schedule(run);
    Json& entry = summary["optimizers"][name];
    entry["rounds"] = std::move(rounds);
    entry["final_loss"] = problem.loss(result.final_x);
    entry["final_grad_norm"] = problem.grad(result.final_x).norm();
    entry["local_steps"] = sched.local_steps;
    entry["learning_rate"] = sched.learning_rate;
    entry["clients"] = run.clients;
    entry["batch_size"] = kind == OptimizerKind::sgd ? run.baseline_batch : run.batch_size;
    if (bundle.accuracy) entry["final_test_accuracy"] = bundle.accuracy(result.final_x);

    if (kind == config.primary()) {
      for (const RoundTrace& t : result.traces) {
        if (!run.records(t.round)) continue;
        const fs::path p = checkpoint_path(options.out, t.round);
        save_checkpoint(p, Checkpoint{kind, sched.learning_rate, sched.local_steps, t});
        files.push_back(fs::relative(p, options.out).generic_string());
      }
    }
    outcome.runs.push_back({kind, std::move(result)});
  }

  write_json(options.out / "train_summary.json", summary);
  files.push_back("train_summary.json");
  if (config.svg) {
    ChartOptions chart{.title = "Training loss",
                       .x_label = "communication round",
                       .y_label = "loss",
                       .log_y = positive,
                       .timestamp = timestamp(options)};
    write_text(options.out / "loss_curve.svg", line_chart_svg(curves, chart));
    files.push_back("loss_curve.svg");
  }
  update_manifest(options.out, config, "train", files);
  return outcome;
}

std::vector<SpectralReport> cmd_diagnose(const ExperimentConfig& config,
                                         const RunOptions& options) {
  config.validate();
  const ProblemBundle bundle = build_problem(config);
  std::vector<SpectralReport> reports;
  std::vector<std::string> files;
  CsvTable ranges({"round", "eigen_min", "eigen_max", "median_eigenvalue",
                   "cpdf_gradient_at_median", "cpdf_update_at_median", "update_relative_error",
                   "predicted_u_soe", "measured_u_soe"});
  for (std::size_t t : config.diagnostics_rounds) {
    const Checkpoint ck = load_checkpoint(checkpoint_path(options.out, t));
    say(options, "diagnose: Hessian at round " + std::to_string(t));
    const Matrix h = bundle.problem->hessian(ck.trace.x);
    const SpectralReport r = analyze_round(h, ck.trace, ck.learning_rate, ck.local_steps,
                                           SpectralOptions{.cpdf_points = config.cpdf_points});
    write_json(options.out / spectral_name(t), spectral_json(r));
    files.push_back(spectral_name(t));

    CsvTable cpdf({"threshold", "cpdf_gradient", "cpdf_update"});
    for (std::size_t i = 0; i < r.cpdf.thresholds.size(); ++i) {
      cpdf.add({num(r.cpdf.thresholds[i]), num(r.cpdf.gradient[i]), num(r.cpdf.update[i])});
    }
    const std::string cpdf_name = "cpdf_round_" + std::to_string(t) + ".csv";
    cpdf.write(options.out / cpdf_name);
    files.push_back(cpdf_name);

    CsvTable soe({"l", "eigenvalue", "energy_grad", "energy_update", "s_l"});
    for (Eigen::Index l = 0; l < r.eigenvalues.size(); ++l) {
      soe.add({num(static_cast<std::size_t>(l)), num(r.eigenvalues(l)), num(r.energy_grad(l)),
               num(r.energy_update(l)), num(r.soe(l))});
    }
    const std::string soe_name = "soe_round_" + std::to_string(t) + ".csv";
    soe.write(options.out / soe_name);
    files.push_back(soe_name);

    ranges.add({num(t), num(r.eigen_min), num(r.eigen_max), num(r.median_eigenvalue),
                num(r.cpdf_gradient_at_median), num(r.cpdf_update_at_median),
                num(r.update_relative_error), num(r.predicted_u_soe), num(r.measured_u_soe)});

    if (config.svg) {
      ChartOptions chart{.title = "CPDF at round " + std::to_string(t),
                         .x_label = "eigenvalue threshold",
                         .y_label = "cumulative energy fraction",
                         .log_x = true,
                         .timestamp = timestamp(options)};
      const std::vector<Series> series{
          {"gradient", r.cpdf.thresholds, r.cpdf.gradient},
          {"local update", r.cpdf.thresholds, r.cpdf.update},
      };
      const std::string svg_name = "cpdf_round_" + std::to_string(t) + ".svg";
      write_text(options.out / svg_name, line_chart_svg(series, chart));
      files.push_back(svg_name);
    }
    reports.push_back(r);
  }
  ranges.write(options.out / "eigen_ranges.csv");
  files.push_back("eigen_ranges.csv");
  update_manifest(options.out, config, "diagnose", files);
  return reports;
}

std::vector<ResidueReport> cmd_residue(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const ProblemBundle bundle = build_problem(config);
  const FedRunConfig run = run_config(config, OptimizerKind::lsgd);
  const std::vector<ClientShard> shards = make_shards(*bundle.problem, run);
  const ClientShard& shard = shards.at(config.residue_client);
  std::vector<ResidueReport> reports;
  CsvTable table({"round", "k", "trials", "grad_norm", "residue_norm", "ratio"});
  Json list = Json::array();
  for (std::size_t t : config.effective_residue_rounds()) {
    const Checkpoint ck = load_checkpoint(checkpoint_path(options.out, t));
    for (std::size_t k : config.residue_iterations) {
      say(options, "residue: round " + std::to_string(t) + ", k = " + std::to_string(k));
      ResidueRequest req;
      req.iteration = k;
      req.learning_rate = config.federation.learning_rate;
      req.batch_size = config.federation.batch_size;
      req.trials = config.residue_trials;
      req.seed = derive_seed(config.federation.seed, 0x7265736964756500ULL + t);
      req.round = t;
      req.threads = config.federation.threads;
      const ResidueReport r =
          estimate_residue_expectation(*bundle.problem, shard, ck.trace.x, req).report;
      table.add({num(t), num(k), num(r.trials), num(r.grad_norm), num(r.residue_norm),
                 num(r.ratio)});
      list.push_back(residue_json(r));
      reports.push_back(r);
    }
  }
  table.write(options.out / "residue_table.csv");
  Json doc;
  doc["client"] = config.residue_client;
  doc["learning_rate"] = config.federation.learning_rate;
  doc["batch_size"] = config.federation.batch_size;
  doc["reports"] = std::move(list);
  write_json(options.out / "residue_report.json", doc);
  update_manifest(options.out, config, "residue", {"residue_table.csv", "residue_report.json"});
  return reports;
}

AuditOutcome cmd_audit(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const fs::path summary_path = options.out / "train_summary.json";
  if (!fs::exists(summary_path)) {
    throw FormatError("missing " + summary_path.string() + "; run `train` first");
  }
  const Json summary = read_json(summary_path);
  const std::string primary(to_string(config.primary()));
  std::vector<RoundTrace> traces;
  std::vector<double> losses;
  try {
    for (const Json& r : summary.at("optimizers").at(primary).at("rounds")) {
      RoundTrace t;
      t.round = r.at("round").get<std::size_t>();
      t.loss = r.at("loss").get<double>();
      t.max_step_grad_norm = r.at("max_step_grad_norm").get<double>();
      t.client_delta_variance = r.at("client_delta_variance").get<double>();
      losses.push_back(t.loss);
      traces.push_back(std::move(t));
    }
  } catch (const Json::exception& e) {
    throw FormatError(summary_path.string() + ": " + e.what());
  }
  if (traces.empty()) throw FormatError(summary_path.string() + " has no rounds");

  std::optional<ProblemBundle> bundle;
  std::vector<Vector> spectra;
  for (std::size_t t : checkpoint_rounds(config)) {
    const fs::path ck_path = checkpoint_path(options.out, t);
    if (!fs::exists(ck_path)) continue;
    Checkpoint ck = load_checkpoint(ck_path);
    if (t < traces.size()) traces[t].client_deltas = std::move(ck.trace.client_deltas);
    if (std::find(config.diagnostics_rounds.begin(), config.diagnostics_rounds.end(), t) ==
        config.diagnostics_rounds.end()) {
      continue;
    }
    const fs::path spectral = options.out / spectral_name(t);
    if (fs::exists(spectral)) {
      spectra.push_back(vector_from_json(read_json(spectral).at("eigenvalues"), "eigenvalues"));
    } else {
      if (!bundle) bundle = build_problem(config);
      say(options, "audit: Hessian spectrum at round " + std::to_string(t));
      spectra.push_back(eig_sym(bundle->problem->hessian(ck.trace.x)).values);
    }
  }

  const EffectiveSchedule sched = effective_schedule(run_config(config, config.primary()));
  AuditOutcome out;
  out.audit = audit_assumptions(traces, spectra, sched.local_steps, sched.learning_rate,
                                config.condition_n);
  while (out.loss_decreasing_rounds + 1 < losses.size() &&
         losses[out.loss_decreasing_rounds + 1] < losses[out.loss_decreasing_rounds]) {
    ++out.loss_decreasing_rounds;
  }
  if (!losses.empty()) ++out.loss_decreasing_rounds;

  const AssumptionAudit& a = out.audit;
  const LearningRateCondition& lr = a.lr_condition;
  Json j;
  j["optimizer"] = primary;
  j["g_hat"] = a.g_hat;
  j["sigma1_sq_hat"] = a.sigma1_sq_hat;
  j["l_hat"] = a.l_hat;
  j["spectra_rounds"] = spectra.size();
  j["lr_condition"] = {{"local_steps", lr.local_steps},
                       {"eta", lr.eta},
                       {"k_eta", static_cast<double>(lr.local_steps) * lr.eta},
                       {"n", lr.n},
                       {"lipschitz", lr.lipschitz},
                       {"bound", finite_or_null(lr.bound)},
                       {"satisfied", lr.satisfied},
                       {"verdict", lr.satisfied ? "satisfied" : "violated"},
                       {"margin", finite_or_null(lr.margin)}};
  j["max_client_correlation"] =
      a.max_client_correlation ? Json(*a.max_client_correlation) : Json(nullptr);
  j["correlation_baseline"] = a.correlation_baseline ? Json(*a.correlation_baseline) : Json(nullptr);
  j["notices"] = a.notices;
  j["loss_decreasing_rounds"] = out.loss_decreasing_rounds;
  write_json(options.out / "audit.json", j);
  update_manifest(options.out, config, "audit", {"audit.json"});
  return out;
}

void cmd_report(const ExperimentConfig& config, const RunOptions& options) {
  cmd_train(config, options);
  if (!config.diagnostics_rounds.empty()) cmd_diagnose(config, options);
  if (!config.effective_residue_rounds().empty() && !config.residue_iterations.empty()) {
    cmd_residue(config, options);
  }
  cmd_audit(config, options);
}

}  // namespace lsgd::app
