#include <doctest.h>

#include "shrinkdim/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

using namespace shrinkdim;

namespace {

nlohmann::json doubling_config() {
  return {{"family", {{"kind", "fixed"}, {"params", {{"multiplier", 2}}}, {"a_range", {0.0, 1.0}},
                      {"X", {{"type", "identity"}}}}},
          {"alpha", {0.5, 1.0}},
          {"n", 6},
          {"n_min", 8},
          {"n_max", 14},
          {"bins", 1024},
          {"seed", 3}};
}

std::string payload(const RunOutput& run, const std::string& name) {
  for (const auto& [n, p] : run.files)
    if (n == name) return p;
  FAIL("missing output ", name);
  return {};
}

}  // namespace

TEST_CASE("config parsing and validation") {
  const ExperimentConfig c = config_from_json(doubling_config());
  CHECK(c.alpha == std::vector<double>{0.5, 1.0});
  CHECK_FALSE(c.y.has_value());
  CHECK(c.a == 0.5);
  CHECK(c.seed == 3);

  auto bad = doubling_config();
  bad.erase("family");
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  bad = doubling_config();
  bad["alpha"] = {-1.0};
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  bad = doubling_config();
  bad["y"] = "middle";
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  bad = doubling_config();
  bad["n_max"] = 40;
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  bad = doubling_config();
  bad["delta"] = "small";
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  bad = doubling_config();
  bad["family"]["kind"] = "unknown";
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("config hash ignores output location and threads") {
  auto j = doubling_config();
  const auto h = config_hash(config_from_json(j));
  j["out"] = "elsewhere";
  j["threads"] = 4;
  CHECK(config_hash(config_from_json(j)) == h);
  j["seed"] = 4;
  CHECK(config_hash(config_from_json(j)) != h);
}

TEST_CASE("csv formatting") {
  CsvTable t({"x", "label"});
  t.row().add(0.1).add(std::string("a,b"));
  t.row().add(3).add(std::string("plain"));
  CHECK(t.str() == "x,label\n0.10000000000000001,\"a,b\"\n3,plain\n");
  CHECK(format_number(std::nan("")) == "nan");
  CsvTable w({"a", "b"});
  w.row().add(1.0);
  CHECK_THROWS_AS(w.str(), std::logic_error);
}

TEST_CASE("partition at generation zero is the whole range") {
  auto j = doubling_config();
  j["n"] = 0;
  const RunOutput r = cmd_partition(config_from_json(j));
  const std::string csv = payload(r, "partition.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}

TEST_CASE("pressure root and density entropy of the doubling map") {
  const ExperimentConfig c = config_from_json(doubling_config());
  const RunOutput p = cmd_pressure(c);
  const auto js = nlohmann::json::parse(payload(p, "pressure.json"));
  REQUIRE(js["roots"].size() == 2);
  CHECK(js["roots"][0]["s0"].get<double>() == doctest::Approx(1.0 / 1.5).epsilon(5e-3));
  CHECK(js["roots"][1]["s0"].get<double>() == doctest::Approx(0.5).epsilon(5e-3));

  const RunOutput d = cmd_density(c);
  const auto dj = nlohmann::json::parse(payload(d, "density.json"));
  CHECK(dj["entropy"].get<double>() == doctest::Approx(std::log(2.0)).epsilon(1e-3));
}

TEST_CASE("runs are deterministic and write a manifest") {
  const ExperimentConfig c = config_from_json(doubling_config());
  const RunOutput a = run_command("cover", c);
  const RunOutput b = run_command("cover", c);
  CHECK(a.files == b.files);
  CHECK(manifest(a, c) == manifest(b, c));
  CHECK_THROWS_AS(run_command("nothing", c), ConfigError);

  const auto dir = std::filesystem::temp_directory_path() / "shrinkdim_test_run";
  std::filesystem::remove_all(dir);
  const auto written = write_run(a, c, dir);
  CHECK(written.size() == a.files.size() + 1);
  std::ifstream in(dir / "manifest.json");
  const auto m = nlohmann::json::parse(in);
  CHECK(m["schema_version"] == kSchemaVersion);
  CHECK(m["command"] == "cover");
  CHECK(m["seed"] == 3);
  CHECK(m.contains("timestamp"));
  CHECK_FALSE(m["config"].contains("out"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("failed writes leave nothing behind") {
  const ExperimentConfig c = config_from_json(doubling_config());
  RunOutput r{"orbit", {{"orbit.csv", "x\n"}, {"sub/missing.csv", "y\n"}}, nlohmann::json::object()};
  const auto dir = std::filesystem::temp_directory_path() / "shrinkdim_test_fail";
  std::filesystem::remove_all(dir);
  CHECK_THROWS(write_run(r, c, dir));
  CHECK_FALSE(std::filesystem::exists(dir));
}
