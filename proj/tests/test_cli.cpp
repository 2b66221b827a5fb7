#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "config.hpp"
#include "experiments.hpp"

using namespace vlab::cli;
using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string failing_path(const std::string& yaml) {
  try {
    resolve_config(parse_config_text(yaml));
  } catch (const ValidationError& e) {
    return e.path();
  }
  return "<accepted>";
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("vlab_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config defaults, typing and round trip") {
  const json c = resolve_config(parse_config_text("command: regularity\nprocess: {hurst: 0.25}\n"));
  CHECK(c["process"]["hurst"].get<double>() == 0.25);
  CHECK(c["grid"]["n_steps"].get<long long>() == 1024);
  CHECK(c["regularity"]["zeta"] == "inf");

  const json again = resolve_config(parse_config_text(c.dump()));
  CHECK(again == c);
  const json from_yaml = resolve_config(parse_config_text(
      "command: regularity\nprocess:\n  hurst: 0.25\nregularity:\n  zeta: .inf\n"));
  CHECK(from_yaml == c);

  const json ints = resolve_config(parse_config_text("grid: {n_steps: 2048.0}\n"));
  CHECK(ints["grid"]["n_steps"].get<long long>() == 2048);
}

TEST_CASE("config errors carry the field path") {
  CHECK(failing_path("process: {hurts: 0.2}") == "process.hurts");
  CHECK(failing_path("process: {hurst: \"0.2\"}") == "process.hurst");
  CHECK(failing_path("grid: {n_steps: 10.5}") == "grid.n_steps");
  CHECK(failing_path("command: simulat") == "command");
  CHECK(failing_path("occupation: {pairs: [[0.5, 0.25]]}") == "occupation.pairs[0]");
  CHECK(failing_path("spectral: {xi: [1, two]}") == "spectral.xi[1]");
  CHECK(failing_path("process: {hurst: 1.5}") == "process.hurst");
  CHECK(failing_path("sweep: {grid: {process.hurts: [0.1]}}") == "sweep.grid.process.hurts");
  CHECK(failing_path("sweep: {grid: {process: [0.1]}}") == "sweep.grid.process");
  CHECK(failing_path("grid: [1, 2]") == "grid");
  CHECK(failing_path("process: {kernel: {family: rl, H: 0.3}}") == "<accepted>");
  CHECK_THROWS_AS(parse_config_text("grid: {n_steps: [1, 2}"), ValidationError);
}

TEST_CASE("config hash") {
  const json a = resolve_config(parse_config_text("seed: 3"));
  json b = a;
  b["output"]["dir"] = "/elsewhere";
  b["threads"] = 4;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  const json c = resolve_config(parse_config_text("seed: 4"));
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("runs are byte-identical and hash-stamped") {
  const json c = resolve_config(parse_config_text(
      "command: young2d\noutput: {tag: y}\nyoung2d: {level: 6, n_sizes: 5, oracle_level: 9}\n"));
  const auto d1 = scratch("rep1");
  const auto d2 = scratch("rep2");
  CHECK(run_and_write(c, d1.string(), false) == 0);
  CHECK(run_and_write(c, d2.string(), false) == 0);
  const std::string csv = read_file(d1 / "y_germ.csv");
  CHECK(csv == read_file(d2 / "y_germ.csv"));
  CHECK(csv.rfind("config_hash,side,defect\n" + config_hash(c) + ",", 0) == 0);
  const json env = json::parse(read_file(d1 / "y.json"));
  CHECK(env["status"] == "ok");
  CHECK(env["config"] == c);
  CHECK(env["config_hash"] == config_hash(c));
}

TEST_CASE("exit codes") {
  const auto d = scratch("exit");
  const json bad = resolve_config(parse_config_text(
      "command: sewing\noutput: {tag: s}\nprocess: {type: fbm}\n"));
  CHECK(run_and_write(bad, d.string(), false) == 2);
  CHECK(json::parse(read_file(d / "s.json"))["error"]["module"] == "cli");

  const json blowup = resolve_config(parse_config_text(
      "command: simulate\noutput: {tag: o}\ngrid: {n_steps: 64}\nensemble: {M: 1}\n"
      "process: {type: volterra, x0: 1.0, drift: {linear: 100.0}, kernel: {family: constant, c: 1.0}}\n"));
  CHECK(run_and_write(blowup, d.string(), false) == 3);
  CHECK(json::parse(read_file(d / "o.json"))["status"] == "error");
}

TEST_CASE("sweeps") {
  const json single = resolve_config(parse_config_text(
      "command: sweep\nsweep: {command: young2d}\nyoung2d: {level: 5, n_sizes: 5, oracle_level: 9}\n"));
  const auto r1 = run_experiment(single);
  CHECK(r1.tables.at("sweep").rows.size() == 1);

  const json c = resolve_config(parse_config_text(
      "command: sweep\nseed: 10\nsweep: {command: young2d, grid: {young2d.level: [5, 40], young2d.side: [0.2, 0.1]}}\n"
      "young2d: {n_sizes: 5, oracle_level: 9}\n"));
  const auto r = run_experiment(c);
  const auto& t = r.tables.at("sweep");
  REQUIRE(t.rows.size() == 4);
  CHECK(t.columns[2] == "young2d.level");
  CHECK(t.columns[3] == "young2d.side");
  CHECK(t.rows[0][1] == "10");
  CHECK(t.rows[3][1] == "13");
  CHECK(t.rows[1][4] == "ok");
  CHECK(t.rows[2][4].rfind("error", 0) == 0);
  CHECK(r.summary.at("failed") == 2.0);
}

TEST_CASE("self-interaction command reports the defect") {
  const json c = resolve_config(parse_config_text(
      "command: selfinteract\ngrid: {n_steps: 64}\nprocess: {hurst: 0.2}\nselfinteract: {xi_max: 64.0}\n"));
  const auto r = run_experiment(c);
  CHECK(r.summary.at("pass") == 1.0);
  CHECK(r.tables.at("solution").rows.size() == 65);
  CHECK(r.results["drift"]["example_condition"] == true);
}

TEST_CASE("odd drifts are flagged") {
  const json c = resolve_config(parse_config_text(
      "command: selfinteract\ngrid: {n_steps: 32}\nprocess: {hurst: 0.2}\n"
      "selfinteract: {drift: edwards, xi_max: 32.0}\n"));
  const auto r = run_experiment(c);
  bool flagged = false;
  for (const auto& w : r.warnings) flagged = flagged || w.find("odd drift") != std::string::npos;
  CHECK(flagged);
  const auto& sol = r.tables.at("solution");
  CHECK(sol.rows.back()[2] == "0");
}
