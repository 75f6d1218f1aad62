#include "shrinkdim/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>

namespace shrinkdim {

namespace {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

Family ExperimentConfig::family() const {
  try {
    return family_from_json(family_doc);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("family: ") + e.what());
  }
}

StartPoint ExperimentConfig::start() const {
  try {
    return start_point_from_json(family_doc.value("X", nlohmann::json::object()));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("family.X: ") + e.what());
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["family"] = family_doc;
  j["alpha"] = alpha;
  j["y"] = y ? nlohmann::json(*y) : nlohmann::json("auto");
  j["a"] = a;
  j["n"] = n;
  j["n_min"] = n_min;
  j["n_max"] = n_max;
  j["delta"] = delta;
  j["epsilon"] = epsilon;
  j["iota"] = iota;
  j["tau1"] = tau1;
  j["levels"] = levels;
  j["seed_generation"] = seed_generation;
  j["probes"] = probes;
  j["children"] = children;
  j["probe_intervals"] = probe_intervals;
  j["samples"] = samples;
  j["bins"] = bins;
  j["s_grid"] = s_grid;
  j["bracket_tolerance"] = bracket_tolerance;
  j["escape_m"] = escape_m;
  j["escape_delta"] = escape_delta;
  j["escape_iota"] = escape_iota;
  j["escape_tau1"] = escape_tau1;
  j["seed"] = seed;
  j["threads"] = threads;
  j["out"] = out;
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  require(j.is_object(), "config must be a JSON object");
  ExperimentConfig c;
  require(j.contains("family"), "config needs a 'family' object");
  c.family_doc = j.at("family");
  require(c.family_doc.is_object(), "'family' must be an object");

  if (j.contains("alpha")) {
    const auto& al = j.at("alpha");
    c.alpha = al.is_array() ? get_or<std::vector<double>>(j, "alpha", {}) : std::vector<double>{al.get<double>()};
  }
  if (j.contains("y")) {
    const auto& y = j.at("y");
    if (y.is_string()) {
      require(y.get<std::string>() == "auto", "y must be a number or \"auto\"");
    } else {
      require(y.is_number(), "y must be a number or \"auto\"");
      c.y = y.get<double>();
    }
  }
  c.a = get_or(j, "a", c.a);
  c.n = get_or(j, "n", c.n);
  c.n_min = get_or(j, "n_min", c.n_min);
  c.n_max = get_or(j, "n_max", c.n_max);
  c.delta = get_or(j, "delta", c.delta);
  c.epsilon = get_or(j, "epsilon", c.epsilon);
  c.iota = get_or(j, "iota", c.iota);
  c.tau1 = get_or(j, "tau1", c.tau1);
  c.levels = get_or(j, "levels", get_or(j, "K_levels", c.levels));
  c.seed_generation = get_or(j, "seed_generation", c.seed_generation);
  c.probes = get_or(j, "probes", c.probes);
  c.children = get_or(j, "children", c.children);
  c.probe_intervals = get_or(j, "probe_intervals", c.probe_intervals);
  c.samples = get_or(j, "samples", c.samples);
  c.bins = get_or(j, "bins", c.bins);
  c.s_grid = get_or(j, "s_grid", c.s_grid);
  c.bracket_tolerance = get_or(j, "bracket_tolerance", c.bracket_tolerance);
  c.escape_m = get_or(j, "escape_m", c.escape_m);
  c.escape_delta = get_or(j, "escape_delta", c.escape_delta);
  c.escape_iota = get_or(j, "escape_iota", c.escape_iota);
  c.escape_tau1 = get_or(j, "escape_tau1", c.escape_tau1);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.threads = get_or(j, "threads", c.threads);
  c.out = get_or(j, "out", c.out);

  require(!c.alpha.empty(), "alpha list is empty");
  for (double al : c.alpha) require(al >= 0.0, "alpha must be non-negative");
  require(c.n >= 0, "n must be non-negative");
  require(c.n_min >= 1 && c.n_min <= c.n_max, "need 1 <= n_min <= n_max");
  require(c.delta > 0.0 && c.delta < 1.0, "delta must lie in (0, 1)");
  require(c.epsilon > 0.0 && c.epsilon < 0.5, "epsilon must lie in (0, 1/2)");
  require(c.iota > 0.0, "iota must be positive");
  require(c.tau1 >= 0.0, "tau1 must be non-negative");
  require(c.levels >= 0, "levels must be non-negative");
  require(c.seed_generation >= 1, "seed_generation must be positive");
  require(c.probes >= 1 && c.children >= 1 && c.probe_intervals >= 0 && c.samples >= 1, "sample counts must be positive");
  require(c.bins >= 16, "bins must be at least 16");
  require(c.threads >= 1, "threads must be positive");
  require(c.bracket_tolerance >= 0.0, "bracket_tolerance must be non-negative");
  for (double s : c.s_grid) require(s >= 0.0, "s_grid entries must be non-negative");
  require(!c.escape_m.empty(), "escape_m is empty");
  for (int m : c.escape_m) require(m >= 1, "escape_m entries must be positive");
  require(c.escape_delta > 0.0 && c.escape_delta < 1.0, "escape_delta must lie in (0, 1)");
  require(c.escape_iota > 0.0 && c.escape_tau1 > 0.0, "escape_iota and escape_tau1 must be positive");

  const Family f = c.family();
  (void)c.start();
  const Range r = f.range();
  if (c.a == 0.0) c.a = r.mid();
  require(r.contains(c.a), "a lies outside the family's parameter range");

  // Interval counts grow like Lambda^n; keep the partition within double resolution.
  const double Lambda = check_assumptions(f, 2000).Lambda_max;
  const int budget = Lambda > 1.0 ? static_cast<int>(std::floor(36.0 * std::log(2.0) / std::log(Lambda))) : 30;
  require(c.n_max <= std::min(30, budget),
          "n_max = " + std::to_string(c.n_max) + " exceeds the precision budget " + std::to_string(std::min(30, budget)) +
              " for Lambda = " + format_number(Lambda));
  require(c.n <= std::min(30, budget), "n exceeds the precision budget");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  nlohmann::json j = config.to_json();
  j.erase("out");
  j.erase("threads");
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvTable& CsvTable::row() {
  rows_.emplace_back();
  return *this;
}

CsvTable& CsvTable::add(double v) {
  rows_.back().push_back(format_number(v));
  return *this;
}

CsvTable& CsvTable::add(long long v) {
  rows_.back().push_back(std::to_string(v));
  return *this;
}

CsvTable& CsvTable::add(const std::string& v) {
  rows_.back().push_back(csv_escape(v));
  return *this;
}

std::string CsvTable::str() const {
  std::string out;
  for (std::size_t k = 0; k < header_.size(); ++k) out += (k ? "," : "") + csv_escape(header_[k]);
  out += '\n';
  for (const auto& r : rows_) {
    if (r.size() != header_.size()) throw std::logic_error("csv row width does not match the header");
    for (std::size_t k = 0; k < r.size(); ++k) out += (k ? "," : "") + r[k];
    out += '\n';
  }
  return out;
}

nlohmann::json manifest(const RunOutput& run, const ExperimentConfig& config) {
  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(config)));
  nlohmann::json cfg = config.to_json();
  cfg.erase("out");
  cfg.erase("threads");
  nlohmann::json files = nlohmann::json::array();
  for (const auto& [name, payload] : run.files) files.push_back({{"name", name}, {"bytes", payload.size()}});
  return {{"schema_version", kSchemaVersion},
          {"command", run.command},
          {"version", SHRINKDIM_VERSION},
          {"config_hash", hash},
          {"seed", config.seed},
          {"config", cfg},
          {"files", files},
          {"summary", run.summary}};
}

std::vector<std::filesystem::path> write_run(const RunOutput& run, const ExperimentConfig& config,
                                             const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const bool created = !fs::exists(dir);
  std::vector<fs::path> written;
  auto put = [&](const fs::path& p, const std::string& payload) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    written.push_back(p);
    f << payload;
    if (!f.flush()) throw std::runtime_error("write failed for " + p.string());
  };
  try {
    fs::create_directories(dir);
    for (const auto& [name, payload] : run.files) put(dir / name, payload);
    nlohmann::json m = manifest(run, config);
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    m["timestamp"] = stamp;
    put(dir / "manifest.json", m.dump(2) + "\n");
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    if (created) fs::remove(dir, ec);
    throw;
  }
  return written;
}

RunOutput run_command(const std::string& command, const ExperimentConfig& config) {
  if (command == "orbit") return cmd_orbit(config);
  if (command == "partition") return cmd_partition(config);
  if (command == "pressure") return cmd_pressure(config);
  if (command == "cover") return cmd_cover(config);
  if (command == "escape") return cmd_escape(config);
  if (command == "cantor") return cmd_cantor(config);
  if (command == "density") return cmd_density(config);
  if (command == "dimension") return cmd_dimension(config);
  throw ConfigError("unknown command '" + command + "'");
}

}  // namespace shrinkdim
