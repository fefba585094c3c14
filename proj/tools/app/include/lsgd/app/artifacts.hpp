#pragma once

#include "lsgd/app/config.hpp"
#include "lsgd/fedsim.hpp"
#include "lsgd/linalg.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lsgd::app {

using Json = nlohmann::json;

/// Shortest decimal text that parses back to the same double; "inf", "-inf"
/// and "nan" for non-finite values.
std::string format_number(double v);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  CsvTable& add(std::vector<std::string> row);
  void write(const std::filesystem::path& path) const;
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Lower-case hex SHA-256 of raw bytes.
std::string sha256_hex(std::string_view bytes);

Json to_json(const Vector& v);
Vector vector_from_json(const Json& j, const char* what);

/// Pretty-printed with sorted keys and a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, std::string_view text);

/// The global model and update of one recorded round.
struct Checkpoint {
  OptimizerKind optimizer = OptimizerKind::lsgd;
  double learning_rate = 0.0;
  std::size_t local_steps = 0;
  RoundTrace trace;
};

std::filesystem::path checkpoint_path(const std::filesystem::path& out, std::size_t round);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
/// Throws FormatError when the file is missing or malformed.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Records the config hash and the files written by `command`, merging with
/// an existing manifest in `out`.
void update_manifest(const std::filesystem::path& out, const ExperimentConfig& config,
                     std::string_view command, const std::vector<std::string>& files);

}  // namespace lsgd::app
