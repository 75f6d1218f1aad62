#pragma once

#include "shrinkdim/family.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace shrinkdim {

inline constexpr int kSchemaVersion = 1;

/// Bad or inconsistent configuration (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  nlohmann::json family_doc;  // {"kind", "params", "a_range", "X"}
  std::vector<double> alpha{1.0};
  std::optional<double> y;  // empty = "auto"
  double a = 0.0;           // parameter for orbit and density; 0 = middle of the range
  int n = 12;               // generation for orbit, partition and cover dumps
  int n_min = 8;            // pressure and cover window
  int n_max = 16;
  double delta = 0.05;
  double epsilon = 0.01;
  double iota = 0.05;
  double tau1 = 0.0;  // 0 = half the admissible bound
  int levels = 3;
  int seed_generation = 8;
  int probes = 64;
  int children = 4;
  int probe_intervals = 256;
  int samples = 1000;
  int bins = 4096;
  std::vector<double> s_grid;  // cover exponent grid; empty = 0.02 .. 1 step 0.02
  double bracket_tolerance = 0.1;
  // Escape-tail run on the iterate-wrapped family.
  std::vector<int> escape_m{20, 25, 30, 35, 40, 45, 50, 55, 60};
  double escape_delta = 0.5;
  double escape_iota = 0.2;
  double escape_tau1 = 0.03;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out = "out";

  Family family() const;
  StartPoint start() const;
  nlohmann::json to_json() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// FNV-1a over the compact dump of the resolved config.
std::uint64_t config_hash(const ExperimentConfig& config);

/// Comma separated table with a header row, numbers as %.17g.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  CsvTable& row();
  CsvTable& add(double v);
  CsvTable& add(long long v);
  CsvTable& add(int v) { return add(static_cast<long long>(v)); }
  CsvTable& add(const std::string& v);
  std::string str() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string format_number(double v);

/// Files produced by one command. Written into the output directory only
/// when the whole command succeeds.
struct RunOutput {
  std::string command;
  std::vector<std::pair<std::string, std::string>> files;  // name, payload
  nlohmann::json summary;

  void add(const std::string& name, const std::string& payload) { files.emplace_back(name, payload); }
  void add(const std::string& name, const nlohmann::json& j) { files.emplace_back(name, j.dump(2) + "\n"); }
  void add(const std::string& name, const CsvTable& t) { files.emplace_back(name, t.str()); }
};

struct DimensionReport {
  double alpha = 0.0;
  double predicted = 0.0;
  double s0 = 0.0;
  double s_hat_upper = 0.0;
  double s_lower = 0.0;
  double y = 0.0;
  int y_attempts = 0;
  std::vector<std::string> flags;
};

RunOutput cmd_orbit(const ExperimentConfig& config);
RunOutput cmd_partition(const ExperimentConfig& config);
RunOutput cmd_pressure(const ExperimentConfig& config);
RunOutput cmd_cover(const ExperimentConfig& config);
RunOutput cmd_escape(const ExperimentConfig& config);
RunOutput cmd_cantor(const ExperimentConfig& config);
RunOutput cmd_density(const ExperimentConfig& config);
RunOutput cmd_dimension(const ExperimentConfig& config, std::vector<DimensionReport>* reports = nullptr);

RunOutput run_command(const std::string& command, const ExperimentConfig& config);

/// Writes every payload plus manifest.json. On any failure the files
/// written so far are removed and the error is rethrown.
std::vector<std::filesystem::path> write_run(const RunOutput& run, const ExperimentConfig& config,
                                             const std::filesystem::path& dir);

/// Manifest without the timestamp (the only non-deterministic field).
nlohmann::json manifest(const RunOutput& run, const ExperimentConfig& config);

}  // namespace shrinkdim
