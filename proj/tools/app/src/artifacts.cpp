#include "lsgd/app/artifacts.hpp"

#include "lsgd/errors.hpp"

#include <openssl/evp.h>

#include <Eigen/Core>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#ifndef LSGD_VERSION
#define LSGD_VERSION "unknown"
#endif

namespace lsgd::app {

namespace fs = std::filesystem;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

CsvTable& CsvTable::add(std::vector<std::string> row) {
  if (row.size() != header_.size()) {
    throw DimensionError("csv row has " + std::to_string(row.size()) + " fields, header has " +
                         std::to_string(header_.size()));
  }
  rows_.push_back(std::move(row));
  return *this;
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) out += ',';
      out += fields[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void CsvTable::write(const fs::path& path) const { write_text(path, str()); }

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xF];
  }
  return out;
}

Json to_json(const Vector& v) {
  Json arr = Json::array();
  for (double e : v) arr.push_back(e);
  return arr;
}

Vector vector_from_json(const Json& j, const char* what) {
  if (!j.is_array()) throw FormatError(std::string(what) + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw FormatError(std::string(what) + " has a non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write failed for " + path.string());
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

Json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

fs::path checkpoint_path(const fs::path& out, std::size_t round) {
  return out / "checkpoints" / ("round_" + std::to_string(round) + ".json");
}

void save_checkpoint(const fs::path& path, const Checkpoint& c) {
  const RoundTrace& t = c.trace;
  Json j;
  j["format"] = "lsgd-checkpoint";
  j["version"] = 1;
  j["optimizer"] = std::string(to_string(c.optimizer));
  j["learning_rate"] = c.learning_rate;
  j["local_steps"] = c.local_steps;
  j["round"] = t.round;
  j["x"] = to_json(t.x);
  j["delta"] = to_json(t.delta);
  j["full_grad"] = to_json(t.full_grad);
  j["loss"] = t.loss;
  j["gap_eq3"] = t.gap_eq3;
  j["max_step_grad_norm"] = t.max_step_grad_norm;
  j["client_delta_variance"] = t.client_delta_variance;
  if (t.test_accuracy) j["test_accuracy"] = *t.test_accuracy;
  Json clients = Json::array();
  for (const Vector& d : t.client_deltas) clients.push_back(to_json(d));
  j["client_deltas"] = std::move(clients);
  write_json(path, j);
}

Checkpoint load_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) {
    throw FormatError("missing checkpoint " + path.string() + "; run `train` first");
  }
  const Json j = read_json(path);
  try {
    if (j.at("format") != "lsgd-checkpoint" || j.at("version") != 1) {
      throw FormatError(path.string() + " is not a version-1 checkpoint");
    }
    Checkpoint c;
    const auto kind = parse_optimizer(j.at("optimizer").get<std::string>());
    if (!kind) throw FormatError(path.string() + ": unknown optimizer");
    c.optimizer = *kind;
    c.learning_rate = j.at("learning_rate").get<double>();
    c.local_steps = j.at("local_steps").get<std::size_t>();
    RoundTrace& t = c.trace;
    t.round = j.at("round").get<std::size_t>();
    t.x = vector_from_json(j.at("x"), "x");
    t.delta = vector_from_json(j.at("delta"), "delta");
    t.full_grad = vector_from_json(j.at("full_grad"), "full_grad");
    t.loss = j.at("loss").get<double>();
    t.gap_eq3 = j.at("gap_eq3").get<double>();
    t.max_step_grad_norm = j.at("max_step_grad_norm").get<double>();
    t.client_delta_variance = j.at("client_delta_variance").get<double>();
    if (j.contains("test_accuracy")) t.test_accuracy = j["test_accuracy"].get<double>();
    for (const Json& d : j.at("client_deltas")) t.client_deltas.push_back(vector_from_json(d, "client delta"));
    if (t.delta.size() != t.x.size() || t.full_grad.size() != t.x.size()) {
      throw FormatError(path.string() + ": vector lengths disagree");
    }
    return c;
  } catch (const Json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void update_manifest(const fs::path& out, const ExperimentConfig& config, std::string_view command,
                     const std::vector<std::string>& files) {
  const fs::path path = out / "manifest.json";
  const std::string hash = sha256_hex(config.source);
  Json m;
  if (fs::exists(path)) {
    m = read_json(path);
    // A manifest from a different config describes stale artifacts.
    if (!m.contains("config") || m["config"].value("sha256", "") != hash) m = Json::object();
  }
  m["config"] = {{"name", config.source_name}, {"sha256", hash}, {"bytes", config.source.size()}};
  m["seed"] = config.federation.seed;
  m["versions"] = {
      {"lsgd", LSGD_VERSION},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                    "." + std::to_string(EIGEN_MINOR_VERSION)},
      {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
  };
  Json listing = Json::object();
  for (const std::string& f : files) {
    std::ifstream in(out / f, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    // SVGs may carry a timestamp, so only their presence is recorded.
    listing[f] = fs::path(f).extension() == ".svg" ? Json("svg") : Json(sha256_hex(buf.str()));
  }
  m["commands"][std::string(command)] = std::move(listing);
  write_json(path, m);
}

}  // namespace lsgd::app
