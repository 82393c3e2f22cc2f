#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "holodisc/cli.hpp"
#include "holodisc/errors.hpp"
#include "holodisc/types.hpp"

using namespace holodisc;
using nlohmann::json;

namespace {

std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("holodisc_cli_" + name);
  std::filesystem::remove_all(p);
  return p.string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kSolve = R"({
  "command": "solve",
  "structure": "standard",
  "resolution": 64,
  "initial_guess": {"kind": "polynomial", "terms": [
    {"component": 0, "coef": [1, 0], "zeta": 1, "zetabar": 0},
    {"component": 0, "coef": [0.05, 0], "zeta": 0, "zetabar": 1}]}
})";

std::string config_error(const std::string& text) {
  try {
    validate_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("fnv1a reference values") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  }

  TEST_CASE("validation errors name the offending line") {
    CHECK(config_error("{\n  \"command\": \"solve\",\n  \"bogus\": 1\n}").find("line 3") != std::string::npos);
    CHECK(config_error("{\n  \"command\": \"solve\",\n\n  \"alpha\": 1.5\n}").find("line 4") != std::string::npos);
    CHECK(config_error("{\"command\": \"solve\", \"resolution\": 4}").find("resolution") != std::string::npos);
    CHECK(config_error("{\"command\": \"solve\", \"epsilon\": 0}").find("epsilon") != std::string::npos);
    CHECK(config_error("{\"command\": \"solve\", \"resolution\": 64.5}").find("integer") != std::string::npos);
    CHECK(config_error("{\"command\": \"fly\"}").find("unknown command") != std::string::npos);
    CHECK(config_error("{\n\"command\": \"solve\",\n  \"alpha\": }").find("line 3") != std::string::npos);
    CHECK(config_error("{\"command\": \"poletsky\"}").find("open_set") != std::string::npos);
  }

  TEST_CASE("canonical form is sorted, complete and ignores the output directory") {
    const json c = json::parse(validate_config(kSolve));
    CHECK(!c.contains("output"));
    CHECK(c["alpha"] == 0.5);
    CHECK(c["seed"] == 7);
    std::string prev;
    for (auto it = c.begin(); it != c.end(); ++it) {
      CHECK(prev < it.key());
      prev = it.key();
    }
    const std::string moved = R"({"resolution": 64, "structure": "standard", "output": "elsewhere",
      "initial_guess": {"terms": [
        {"zetabar": 0, "zeta": 1, "coef": [1, 0], "component": 0},
        {"component": 0, "coef": [0.05, 0], "zeta": 0, "zetabar": 1}], "kind": "polynomial"},
      "command": "solve"})";
    CHECK(validate_config(moved) == validate_config(kSolve));
  }

  TEST_CASE("catalog lists the structures") {
    const std::string dir = temp_dir("catalog");
    const RunResult r = run_config(R"({"command": "catalog"})", dir);
    CHECK(r.exit_code == 0);
    const json rep = json::parse(r.report);
    CHECK(rep["entries"].size() >= 3);
    CHECK(rep["version"] == std::string(kVersion));
    CHECK(read_file(dir + "/report.json") == r.report);
  }

  TEST_CASE("solve reports the one-step case") {
    const std::string dir = temp_dir("solve");
    const RunResult r = run_config(kSolve, dir, true);
    CHECK(r.exit_code == 0);
    const json rep = json::parse(r.report);
    CHECK(rep["certificate"]["iterations"] == 1);
    CHECK(rep["certificate"]["final_residual"].get<double>() <= 1e-4);
    CHECK(rep["grid"]["resolution"] == 64);
    CHECK(rep["config_hash"].get<std::string>().size() == 16);
    CHECK(std::filesystem::exists(dir + "/u.csv"));
    CHECK(std::filesystem::exists(dir + "/phi.csv"));
    const RunResult again = run_config(kSolve, temp_dir("solve2"), true);
    CHECK(again.report == r.report);
  }

  TEST_CASE("an unmet hypothesis is a warning exit") {
    json c = json::parse(kSolve);
    c["c0"] = 100.0;
    const RunResult r = run_config(c.dump(), temp_dir("warn"), true);
    const json rep = json::parse(r.report);
    CHECK(rep["certificate"]["hypothesis_met"] == false);
    CHECK(rep["certificate"]["final_residual"].get<double>() <= 1e-4);
    CHECK(r.exit_code == 2);
  }

  TEST_CASE("graft demo reports the residual drop") {
    const RunResult r = run_config(R"({"command": "graft-demo", "target": "riemann_sphere"})", temp_dir("graft"), true);
    CHECK(r.exit_code == 0);
    const json rep = json::parse(r.report);
    CHECK(rep["circle_identity_error"].get<double>() <= 1e-12);
    CHECK(rep["residual_before_inside"].get<double>() == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(rep["residual_after_inside"].get<double>() <= 0.01);
    CHECK(r.files.size() == 3);
  }

  TEST_CASE("module errors surface with their stage") {
    const RunResult r = run_config(R"({
      "command": "poletsky", "resolution": 32,
      "p": [[0, 0]],
      "loop": {"kind": "circle", "radius": 2.0},
      "open_set": {"kind": "ball", "center": [[0, 0]], "radius": 1.0}
    })", temp_dir("fail"), true);
    CHECK(r.exit_code == 1);
    const json rep = json::parse(r.report);
    REQUIRE(rep.contains("error"));
    CHECK(!rep["error"]["stage"].get<std::string>().empty());
    CHECK(r.message.find(rep["error"]["stage"].get<std::string>()) == 0);
  }

  TEST_CASE("config errors do not run anything") {
    const RunResult r = run_config(R"({"command": "solve", "alpha": 2})", temp_dir("bad"));
    CHECK(r.exit_code == 1);
    CHECK(r.files.empty());
    CHECK(r.message.find("alpha") != std::string::npos);
  }
}
