#include "lsgd/app/config.hpp"

#define TOML_ENABLE_FORMATTERS 0
#include <toml++/toml.hpp>

#include <concepts>
#include <fstream>
#include <set>
#include <sstream>

namespace lsgd::app {
namespace {

std::size_t line_of(const toml::node& n) { return n.source().begin.line; }

// Typed access to one table; every key read is remembered so leftovers can
// be reported as unknown.
class Section {
 public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  bool present() const { return table_ != nullptr; }

  template <typename Fn>
  void visit(const char* key, Fn&& fn) {
    used_.insert(key);
    if (table_ == nullptr) return;
    if (const toml::node* n = table_->get(key)) fn(*n);
  }

  void read(const char* key, std::string& out) {
    visit(key, [&](const toml::node& n) {
      if (!n.is_string()) fail(key, n, "a string");
      out = *n.value<std::string>();
    });
  }

  void read(const char* key, bool& out) {
    visit(key, [&](const toml::node& n) {
      if (!n.is_boolean()) fail(key, n, "true or false");
      out = *n.value<bool>();
    });
  }

  void read(const char* key, double& out) {
    visit(key, [&](const toml::node& n) { out = as_double(key, n); });
  }

  template <std::unsigned_integral T>
  void read(const char* key, T& out) {
    visit(key, [&](const toml::node& n) { out = static_cast<T>(as_count(key, n)); });
  }

  void read(const char* key, int& out) {
    visit(key, [&](const toml::node& n) { out = static_cast<int>(as_count(key, n)); });
  }

  void read(const char* key, std::vector<double>& out) {
    visit(key, [&](const toml::node& n) {
      const toml::array* arr = n.as_array();
      if (arr == nullptr) fail(key, n, "an array of numbers");
      out.clear();
      for (const toml::node& e : *arr) out.push_back(as_double(key, e));
    });
  }

  void read(const char* key, std::vector<std::size_t>& out) {
    visit(key, [&](const toml::node& n) {
      const toml::array* arr = n.as_array();
      if (arr == nullptr) fail(key, n, "an array of non-negative integers");
      out.clear();
      for (const toml::node& e : *arr) out.push_back(as_count(key, e));
    });
  }

  void read(const char* key, std::vector<std::string>& out) {
    visit(key, [&](const toml::node& n) {
      const toml::array* arr = n.as_array();
      if (arr == nullptr) fail(key, n, "an array of strings");
      out.clear();
      for (const toml::node& e : *arr) {
        if (!e.is_string()) fail(key, e, "an array of strings");
        out.push_back(*e.value<std::string>());
      }
    });
  }

  /// Line of `key`, or 0 when absent.
  std::size_t line(const char* key) const {
    if (table_ == nullptr) return 0;
    const toml::node* n = table_->get(key);
    return n != nullptr ? line_of(*n) : 0;
  }

  void reject_unknown() const {
    if (table_ == nullptr) return;
    for (const auto& [k, v] : *table_) {
      if (!used_.contains(std::string(k.str()))) {
        throw ConfigError("unknown key '" + std::string(k.str()) + "' in [" + name_ + "]",
                          line_of(v));
      }
    }
  }

  [[noreturn]] void fail(const char* key, const toml::node& n, const char* expected) const {
    throw ConfigError("[" + name_ + "] " + key + " must be " + expected, line_of(n));
  }

 private:
  double as_double(const char* key, const toml::node& n) const {
    if (n.is_floating_point()) return *n.value<double>();
    if (n.is_integer()) return static_cast<double>(*n.value<std::int64_t>());
    fail(key, n, "a number");
  }

  std::size_t as_count(const char* key, const toml::node& n) const {
    if (!n.is_integer() || *n.value<std::int64_t>() < 0) {
      fail(key, n, "a non-negative integer");
    }
    return static_cast<std::size_t>(*n.value<std::int64_t>());
  }

  const toml::table* table_;
  std::string name_;
  std::set<std::string> used_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void parse_problem(Section& s, ExperimentConfig& c, const std::filesystem::path& base) {
  ProblemSpec& p = c.problem;
  std::string kind = "quadratic";
  s.read("kind", kind);
  if (kind == "quadratic") {
    p.kind = ProblemKind::quadratic;
  } else if (kind == "logistic") {
    p.kind = ProblemKind::logistic;
  } else if (kind == "softmax") {
    p.kind = ProblemKind::softmax;
  } else {
    throw ConfigError("[problem] kind must be quadratic, logistic or softmax", s.line("kind"));
  }
  s.read("seed", p.seed);
  s.read("dim", p.dim);
  s.read("eigenvalues", p.eigenvalues);
  s.read("eigen_min", p.eigen_min);
  s.read("eigen_max", p.eigen_max);
  s.read("noise_std", p.noise_std);
  s.read("samples", p.samples);

  std::string dataset = "synthetic";
  s.read("dataset", dataset);
  if (dataset == "synthetic") {
    p.dataset = DatasetSource::synthetic;
  } else if (dataset == "mnist") {
    p.dataset = DatasetSource::mnist;
  } else {
    throw ConfigError("[problem] dataset must be synthetic or mnist", s.line("dataset"));
  }
  s.read("features", p.features);
  s.read("classes", p.classes);
  s.read("separation", p.separation);
  std::string train_images, train_labels, test_images, test_labels;
  s.read("train_images", train_images);
  s.read("train_labels", train_labels);
  s.read("test_images", test_images);
  s.read("test_labels", test_labels);
  p.train_images = resolve(base, train_images);
  p.train_labels = resolve(base, train_labels);
  p.test_images = resolve(base, test_images);
  p.test_labels = resolve(base, test_labels);
  s.read("downsample", p.downsample);
  s.read("limit", p.limit);
  s.read("hessian_budget", p.hessian_budget);
}

void parse_federation(Section& s, ExperimentConfig& c) {
  FedRunConfig& f = c.federation;
  std::vector<std::string> names;
  s.read("optimizers", names);
  if (!names.empty()) {
    c.optimizers.clear();
    for (const std::string& n : names) {
      const auto kind = parse_optimizer(n);
      if (!kind) {
        throw ConfigError("[federation] unknown optimizer '" + n + "'", s.line("optimizers"));
      }
      c.optimizers.push_back(*kind);
    }
  }
  s.read("clients", f.clients);
  s.read("local_steps", f.local_steps);
  s.read("rounds", f.rounds);
  s.read("learning_rate", f.learning_rate);
  s.read("batch_size", f.batch_size);
  s.read("full_batch", f.full_batch);
  s.read("seed", f.seed);
  std::string partition = "iid";
  s.read("partition", partition);
  if (partition == "iid") {
    f.partition = PartitionMode::iid;
  } else if (partition == "shared") {
    f.partition = PartitionMode::shared;
  } else {
    throw ConfigError("[federation] partition must be iid or shared", s.line("partition"));
  }
  s.read("baseline_batch", f.baseline_batch);
  s.read("baseline_learning_rate", f.baseline_learning_rate);
  s.read("threads", f.threads);
  std::string init = "zeros";
  s.read("init", init);
  if (init == "zeros") {
    c.init = InitMode::zeros;
  } else if (init == "normal") {
    c.init = InitMode::normal;
  } else {
    throw ConfigError("[federation] init must be zeros or normal", s.line("init"));
  }
  s.read("init_scale", c.init_scale);
}

const toml::table* section(const toml::table& root, const char* name) {
  const toml::node* n = root.get(name);
  if (n == nullptr) return nullptr;
  if (!n->is_table()) throw ConfigError(std::string("'") + name + "' must be a section", line_of(*n));
  return n->as_table();
}

}  // namespace

void ExperimentConfig::validate() const {
  try {
    federation.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("[federation] ") + e.what());
  }
  if (optimizers.empty()) throw ConfigError("[federation] optimizers must not be empty");
  for (std::size_t t : diagnostics_rounds) {
    if (t >= federation.rounds) {
      throw ConfigError("[diagnostics] round " + std::to_string(t) + " is outside [0, " +
                        std::to_string(federation.rounds) + ")");
    }
  }
  for (std::size_t t : residue_rounds) {
    if (t >= federation.rounds) {
      throw ConfigError("[residue] round " + std::to_string(t) + " is outside [0, " +
                        std::to_string(federation.rounds) + ")");
    }
  }
  if (residue_trials < 1) throw ConfigError("[residue] trials must be at least 1");
  if (residue_client >= federation.clients) {
    throw ConfigError("[residue] client must be below [federation] clients");
  }
  if (!(condition_n >= 1.0)) throw ConfigError("[diagnostics] condition_n must be >= 1");
  if (cpdf_points < 2) throw ConfigError("[diagnostics] cpdf_points must be at least 2");
  if (problem.kind == ProblemKind::quadratic) {
    if (problem.dim < 1) throw ConfigError("[problem] dim must be at least 1");
    if (!problem.eigenvalues.empty() && problem.eigenvalues.size() != problem.dim) {
      throw ConfigError("[problem] eigenvalues must have dim entries");
    }
    if (problem.eigenvalues.empty() &&
        !(problem.eigen_min > 0.0 && problem.eigen_max >= problem.eigen_min)) {
      throw ConfigError("[problem] need 0 < eigen_min <= eigen_max");
    }
    if (!(problem.noise_std >= 0.0)) throw ConfigError("[problem] noise_std must be >= 0");
    if (problem.samples < 1) throw ConfigError("[problem] samples must be at least 1");
  } else if (problem.dataset == DatasetSource::mnist) {
    if (problem.train_images.empty() || problem.train_labels.empty()) {
      throw ConfigError("[problem] mnist needs train_images and train_labels");
    }
    if (problem.test_images.empty() != problem.test_labels.empty()) {
      throw ConfigError("[problem] test_images and test_labels go together");
    }
    if (problem.kind == ProblemKind::logistic) {
      throw ConfigError("[problem] mnist has 10 classes; use kind = \"softmax\"");
    }
  } else {
    if (problem.samples < 1 || problem.features < 1) {
      throw ConfigError("[problem] samples and features must be at least 1");
    }
    if (problem.kind == ProblemKind::softmax && problem.classes < 2) {
      throw ConfigError("[problem] classes must be at least 2");
    }
  }
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw ConfigError(std::string(e.description()), e.source().begin.line);
  }
  static const std::set<std::string> kSections{"problem", "federation", "diagnostics", "residue",
                                               "output"};
  for (const auto& [k, v] : root) {
    if (!kSections.contains(std::string(k.str()))) {
      throw ConfigError("unknown section or key '" + std::string(k.str()) + "'", line_of(v));
    }
  }

  ExperimentConfig c;
  c.source = text;
  c.problem.samples = 0;

  Section problem(section(root, "problem"), "problem");
  parse_problem(problem, c, base_dir);
  if (c.problem.samples == 0) c.problem.samples = c.problem.kind == ProblemKind::quadratic ? 1 : 1000;

  Section federation(section(root, "federation"), "federation");
  parse_federation(federation, c);

  Section diagnostics(section(root, "diagnostics"), "diagnostics");
  diagnostics.read("rounds", c.diagnostics_rounds);
  diagnostics.read("cpdf_points", c.cpdf_points);
  diagnostics.read("checkpoint_all", c.checkpoint_all);
  diagnostics.read("condition_n", c.condition_n);

  Section residue(section(root, "residue"), "residue");
  residue.read("iterations", c.residue_iterations);
  residue.read("rounds", c.residue_rounds);
  residue.read("trials", c.residue_trials);
  residue.read("client", c.residue_client);

  Section output(section(root, "output"), "output");
  std::string dir = "out";
  output.read("directory", dir);
  c.output_dir = dir;
  output.read("svg", c.svg);

  for (const Section* s : {&problem, &federation, &diagnostics, &residue, &output}) {
    s->reject_unknown();
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  ExperimentConfig c = parse_config(buf.str(), path.parent_path());
  c.source_name = path.filename().string();
  return c;
}

}  // namespace lsgd::app
