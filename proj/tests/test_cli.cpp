#include "doctest.h"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "../tools/app.hpp"
#include "nlwave/error.hpp"
#include "nlwave/mesh.hpp"

using namespace nlw::app;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  fs::path p = fs::temp_directory_path() / ("nlwave_cli_" + name + "_" + std::to_string(stamp));
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Outcome {
  int code;
  std::string err;
};

Outcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "nlwave");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream err, out;
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  const int code = run_cli(static_cast<int>(argv.size()), argv.data());
  std::cerr.rdbuf(old_err);
  std::cout.rdbuf(old_out);
  return {code, err.str()};
}

const char* kSmallExpand = R"({
  // a 17^2 grid keeps the test fast
  "expand": {"dims": 17, "remainder": false}
})";

}  // namespace

TEST_CASE("resolved config fills defaults and keeps its hash under re-serialization") {
  const json cfg = resolve_config(parse_config_text(kSmallExpand, "inline"));
  CHECK(cfg["expand"]["dims"] == 17);
  CHECK(cfg["expand"]["epsilons"].size() == 3);
  CHECK(cfg["reconstruct"]["truths"].size() == 2);
  const json again = resolve_config(json::parse(cfg.dump(2)));
  CHECK(config_hash(again) == config_hash(cfg));
  CHECK(config_hash(resolve_config(json::object())) != config_hash(cfg));
}

TEST_CASE("config errors name the field path") {
  auto message = [](const std::string& text) {
    try {
      resolve_config(parse_config_text(text, "inline"));
    } catch (const nlw::Error& e) {
      CHECK(e.kind() == nlw::ErrorKind::Config);
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(R"({"expand": {"dims": 17.5}})").find("expand.dims") != std::string::npos);
  CHECK(message(R"({"expand": {"epsilons": [0.01, "x"]}})").find("expand.epsilons[1]") != std::string::npos);
  CHECK(message(R"({"cgo": {"family": {"radius": 1}}})").find("cgo.family.radius: unknown field") !=
        std::string::npos);
  CHECK(message(R"({"reconstruct": {"truths": [{"j": "0"}]}})").find("reconstruct.truths[0].j") !=
        std::string::npos);
  CHECK(message("{\"seed\": 1,,}").find("parse error") != std::string::npos);
}

TEST_CASE("malformed configs exit with status 2") {
  const fs::path dir = scratch("bad");
  write(dir / "broken.json", "{\"expand\": {\"dims\": ");
  Outcome r = cli({"expand", "--config", (dir / "broken.json").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("parse error") != std::string::npos);

  write(dir / "typed.json", R"({"expand": {"min_slope": "high"}})");
  r = cli({"expand", "--config", (dir / "typed.json").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("expand.min_slope") != std::string::npos);

  write(dir / "range.json", R"({"expand": {"dims": 3}})");
  r = cli({"expand", "--config", (dir / "range.json").string(), "--out", (dir / "run").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("expand.dims") != std::string::npos);
  const json m = json::parse(slurp(dir / "run" / "manifest.json"));
  CHECK(m["status"] == "error");
  CHECK(m["error"]["kind"] == "config");

  CHECK(cli({"expand", "--config", (dir / "missing.json").string()}).code == 2);
  CHECK(cli({"reconstruct", "--mode", "sideways"}).code == 2);
  CHECK(cli({"nonsense"}).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("expand writes the manifest, resolved config and CSV") {
  const fs::path dir = scratch("expand");
  write(dir / "cfg.json", kSmallExpand);
  const Outcome r = cli({"expand", "--config", (dir / "cfg.json").string(), "--out", (dir / "run").string()});
  CHECK(r.code == 0);
  const json m = json::parse(slurp(dir / "run" / "manifest.json"));
  CHECK(m["status"] == "passed");
  CHECK(m["version"] == toolkit_version());
  const json resolved = json::parse(slurp(dir / "run" / "config.resolved.json"));
  CHECK(m["config_hash"] == config_hash(resolved));
  CHECK(resolved["output"] == (dir / "run").string());
  CHECK(m["stages"][0]["metrics"]["residual_slope"].get<double>() >= 2.7);
  CHECK(fs::exists(dir / "run" / "expand_residuals.csv"));
  CHECK(slurp(dir / "run" / "expand_residuals.csv").rfind("epsilon,residual_h1", 0) == 0);
  CHECK_FALSE(fs::exists(dir / "run" / "manifest.json.tmp"));
  fs::remove_all(dir);
}

TEST_CASE("simulate writes readable snapshots") {
  const fs::path dir = scratch("simulate");
  write(dir / "cfg.json", R"({"simulate": {"dims": 13, "horizon": 0.5, "snapshots": 2}})");
  CHECK(cli({"simulate", "--config", (dir / "cfg.json").string(), "--out", dir.string(), "--seed", "3"}).code == 0);
  const nlw::Snapshot s = nlw::read_snapshot((dir / "snapshots" / "simulate_gamma").string());
  CHECK(s.dims == 13);
  CHECK(s.role == "gamma");
  CHECK(json::parse(slurp(dir / "config.resolved.json"))["seed"] == 3);
  fs::remove_all(dir);
}

TEST_CASE("report over run directories") {
  const fs::path dir = scratch("report");
  CHECK(cli({"report", dir.string()}).code == 2);
  CHECK(cli({"report", (dir / "absent").string()}).code == 2);

  write(dir / "ok.json", kSmallExpand);
  write(dir / "strict.json", R"({"expand": {"dims": 17, "remainder": false, "min_slope": 10.0}})");
  CHECK(cli({"expand", "--config", (dir / "ok.json").string(), "--out", (dir / "runs" / "a").string()}).code == 0);
  const Outcome failed =
      cli({"expand", "--config", (dir / "strict.json").string(), "--out", (dir / "runs" / "b").string()});
  CHECK(failed.code == 3);
  CHECK(failed.err.find("expand") != std::string::npos);

  CHECK(cli({"report", (dir / "runs").string()}).code == 0);
  const std::string first = slurp(dir / "runs" / "summary.json");
  const json s = json::parse(first);
  CHECK(s["total_runs"] == 2);
  CHECK(s["failed_runs"] == 1);
  CHECK(s["failed_checks"].size() == 2);
  for (const json& c : s["failed_checks"]) CHECK(c["run"] == "b");
  CHECK(slurp(dir / "runs" / "summary.txt").find("FAIL residual_slope") != std::string::npos);

  CHECK(cli({"report", (dir / "runs").string()}).code == 0);
  CHECK(slurp(dir / "runs" / "summary.json") == first);

  write(dir / "runs" / "b" / "manifest.json", "{\"status\": ");
  const Outcome corrupt = cli({"report", (dir / "runs").string()});
  CHECK(corrupt.code == 2);
  CHECK(corrupt.err.find("b/manifest.json") != std::string::npos);
  write(dir / "runs" / "b" / "manifest.json", "{\"status\": \"passed\"}");
  CHECK(cli({"report", (dir / "runs").string()}).code == 2);
  fs::remove_all(dir);
}
