#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "app.hpp"
#include "nlwave/error.hpp"

#ifndef NLWAVE_VERSION
#define NLWAVE_VERSION "0.0.0"
#endif

namespace nlw::app {

namespace fs = std::filesystem;

const char* toolkit_version() { return NLWAVE_VERSION; }

namespace {

using StageFn = std::function<StageResult(const json&, const Context&)>;

const std::map<std::string, StageFn>& stage_table() {
  static const std::map<std::string, StageFn> t{
      {"simulate", run_simulate},         {"expand", run_expand},         {"spectral-check", run_spectral},
      {"laplace-check", run_laplace},     {"cgo-check", run_cgo},         {"asymptotic-check", run_asymptotic},
      {"reconstruct", run_reconstruct}};
  return t;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Numerical: return 3;
    case ErrorKind::Internal: return 4;
  }
  return 4;
}

std::string kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::Internal: return "internal";
  }
  return "internal";
}

void write_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    out.flush();
    if (!out) throw Error(ErrorKind::Internal, "io", "cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path, const std::string& stage) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error(stage, path.string() + ": cannot read");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string csv_cell(const json& v) {
  if (!v.is_string()) return v.dump();
  const std::string s = v.get<std::string>();
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

std::string csv_text(const Table& t) {
  std::string out;
  for (size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + t.header[i];
  out += "\n";
  for (const auto& row : t.rows) {
    for (size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_cell(row[i]);
    out += "\n";
  }
  return out;
}

json check_json(const Check& c) {
  return {{"criterion", c.criterion}, {"metric", c.metric}, {"value", c.value},
          {"op", c.op},               {"bound", c.bound},   {"pass", c.pass}};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string check_line(const Check& c) {
  return std::string(c.pass ? "PASS" : "FAIL") + " " + c.metric + " = " + fmt(c.value) + " " + c.op + " " +
         fmt(c.bound) + (c.criterion.empty() ? "" : " [criterion " + c.criterion + "]");
}

struct Options {
  std::string config, out, mode;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 1;
  std::string dir;
};

json load_config(const Options& o) {
  json user = json::object();
  if (!o.config.empty()) user = parse_config_text(read_file(o.config, "config"), o.config);
  if (!user.is_object()) throw config_error("config", o.config + ": top level must be an object");
  if (o.seed_set) user["seed"] = o.seed;
  if (!o.out.empty()) user["output"] = o.out;
  return resolve_config(user);
}

int run_stage(const std::string& name, const Options& o) {
  json cfg;
  try {
    cfg = load_config(o);
  } catch (const Error& e) {
    std::cerr << "error[" << kind_name(e.kind()) << "] " << e.what() << "\n";
    return exit_code(e.kind());
  }
  const fs::path out = cfg.at("output").get<std::string>();
  const std::string hash = config_hash(cfg);
  try {
    fs::create_directories(out);
    write_atomic(out / "config.resolved.json", cfg.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "error[internal] " << e.what() << "\n";
    return 4;
  }
  std::cout << "config " << hash << " resolved to " << (out / "config.resolved.json").string() << "\n";

  json manifest = {{"toolkit", "nlwave"},   {"version", toolkit_version()}, {"subcommand", name},
                   {"config_hash", hash},   {"config_file", "config.resolved.json"}};
  json stage = {{"name", name}};
  int code = 0;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    Context ctx;
    ctx.out = out.string();
    ctx.jobs = o.jobs;
    if (!o.mode.empty()) ctx.modes = {o.mode};
    if (o.jobs < 1) throw config_error("config", "jobs: must be >= 1");
    StageResult r = stage_table().at(name)(cfg, ctx);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json artifacts = json::array();
    for (const Table& t : r.tables) {
      write_atomic(out / (t.name + ".csv"), csv_text(t));
      artifacts.push_back(t.name + ".csv");
    }
    for (const auto& s : r.snapshots) artifacts.push_back(s);
    json checks = json::array();
    for (const Check& c : r.checks) {
      checks.push_back(check_json(c));
      std::cout << check_line(c) << "\n";
    }
    const std::string metrics_file = name + "_metrics.json";
    write_atomic(out / metrics_file, json{{"stage", name}, {"metrics", r.metrics}, {"checks", checks}}.dump(2) + "\n");
    artifacts.push_back(metrics_file);
    stage["status"] = r.passed() ? "passed" : "failed";
    stage["seconds"] = r.seconds;
    stage["metrics"] = r.metrics;
    stage["checks"] = checks;
    stage["artifacts"] = artifacts;
    if (!r.passed()) {
      code = 3;
      for (const Check& c : r.checks)
        if (!c.pass) std::cerr << "error[numerical] " << name << ": " << check_line(c) << "\n";
    }
  } catch (const Error& e) {
    code = exit_code(e.kind());
    stage["status"] = "error";
    manifest["error"] = {{"kind", kind_name(e.kind())}, {"stage", e.stage()}, {"message", e.what()}};
    std::cerr << "error[" << kind_name(e.kind()) << "] " << e.what() << "\n";
  } catch (const std::exception& e) {
    code = 4;
    stage["status"] = "error";
    manifest["error"] = {{"kind", "internal"}, {"stage", name}, {"message", e.what()}};
    std::cerr << "error[internal] " << name << ": " << e.what() << "\n";
  }
  if (!stage.contains("seconds"))
    stage["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest["stages"] = json::array({stage});
  manifest["status"] = code == 0 ? "passed" : (code == 3 ? "failed" : "error");
  manifest["exit_code"] = code;
  try {
    write_atomic(out / "manifest.json", manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "error[internal] " << e.what() << "\n";
    return 4;
  }
  return code;
}

json load_manifest(const fs::path& path, const std::string& rel) {
  json m;
  try {
    m = json::parse(read_file(path, "report"));
  } catch (const json::parse_error& e) {
    throw config_error("report", rel + ": corrupt manifest, parse error at byte " + std::to_string(e.byte));
  }
  for (const char* key : {"subcommand", "config_hash", "status", "exit_code", "stages"})
    if (!m.is_object() || !m.contains(key)) throw config_error("report", rel + ": corrupt manifest, missing '" + key + "'");
  if (!m["stages"].is_array()) throw config_error("report", rel + ": corrupt manifest, 'stages' is not an array");
  return m;
}

int run_report(const Options& o) {
  try {
    const fs::path dir = o.dir;
    if (!fs::is_directory(dir)) throw config_error("report", o.dir + ": not a directory");
    std::vector<std::string> rels;
    if (fs::exists(dir / "manifest.json")) rels.push_back(".");
    std::vector<std::string> subs;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory() && fs::exists(e.path() / "manifest.json")) subs.push_back(e.path().filename().string());
    std::sort(subs.begin(), subs.end());
    rels.insert(rels.end(), subs.begin(), subs.end());
    if (rels.empty()) throw config_error("report", o.dir + ": no run manifest found");

    json runs = json::array(), failed = json::array();
    std::ostringstream table;
    table << "run | subcommand | stage | status | seconds | checks\n";
    int failed_runs = 0;
    for (const auto& rel : rels) {
      const json m = load_manifest(dir / rel / "manifest.json", rel + "/manifest.json");
      const bool ok = m["status"] == "passed";
      if (!ok) ++failed_runs;
      json stages = json::array();
      for (const json& s : m["stages"]) {
        int pass = 0, total = 0;
        json fails = json::array();
        if (s.contains("checks"))
          for (const json& c : s["checks"]) {
            ++total;
            if (c.value("pass", false)) {
              ++pass;
              continue;
            }
            fails.push_back(c);
            json f = c;
            f["run"] = rel;
            f["stage"] = s.value("name", "");
            failed.push_back(f);
          }
        const double secs = s.value("seconds", 0.0);
        stages.push_back({{"name", s.value("name", "")},
                          {"status", s.value("status", "unknown")},
                          {"seconds", secs},
                          {"checks_passed", pass},
                          {"checks_total", total},
                          {"failed_checks", fails},
                          {"metrics", s.value("metrics", json::object())}});
        table << rel << " | " << m["subcommand"].get<std::string>() << " | " << s.value("name", "") << " | "
              << (ok ? "passed" : "FAILED (" + m["status"].get<std::string>() + ")") << " | " << fmt(secs) << " | "
              << pass << "/" << total << "\n";
        for (const json& c : fails)
          table << "  FAIL " << c.value("metric", "") << " = " << fmt(c.value("value", 0.0)) << " "
                << c.value("op", "") << " " << fmt(c.value("bound", 0.0)) << "\n";
      }
      json run = {{"run", rel},
                  {"subcommand", m["subcommand"]},
                  {"config_hash", m["config_hash"]},
                  {"status", m["status"]},
                  {"exit_code", m["exit_code"]},
                  {"stages", stages}};
      if (m.contains("error")) {
        run["error"] = m["error"];
        table << "  ERROR " << m["error"].value("message", "") << "\n";
      }
      runs.push_back(run);
    }
    table << "runs: " << rels.size() << ", failed: " << failed_runs << "\n";
    const json summary = {{"toolkit", "nlwave"},         {"version", toolkit_version()}, {"runs", runs},
                          {"total_runs", rels.size()},   {"failed_runs", failed_runs},   {"failed_checks", failed}};
    write_atomic(dir / "summary.json", summary.dump(2) + "\n");
    write_atomic(dir / "summary.txt", table.str());
    std::cout << table.str();
    return 0;
  } catch (const Error& e) {
    std::cerr << "error[" << kind_name(e.kind()) << "] " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error[internal] report: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"nlwave: simulation, identity checks and coefficient recovery for quasilinear wave equations"};
  app.set_version_flag("--version", toolkit_version());
  app.require_subcommand(1, 1);
  Options o;
  const std::map<std::string, std::string> about{
      {"simulate", "nonlinear forward run with boundary traces and field snapshots"},
      {"expand", "epsilon expansion and DN-map expansion residual orders"},
      {"spectral-check", "two-solver equivalence, polarization oracle and u2^(-1) residual"},
      {"laplace-check", "chi transform asymptotics, integral identity and dominance diagnostic"},
      {"cgo-check", "CGO remainder quality, independent family and vanishing terms"},
      {"asymptotic-check", "boundary-layer approximation orders"},
      {"reconstruct", "Fourier panels and recovery of the symmetric quadratic coefficients"}};
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, text] : about) {
    CLI::App* sc = app.add_subcommand(name, text);
    sc->add_option("--config", o.config, "experiment config (JSON with comments)");
    sc->add_option("--out", o.out, "output directory, overrides the config");
    sc->add_option_function<std::uint64_t>(
        "--seed", [&o](std::uint64_t s) { o.seed = s, o.seed_set = true; }, "coefficient recipe seed");
    sc->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
    if (name == "reconstruct")
      sc->add_option("--mode", o.mode, "measurement mode")->check(CLI::IsMember({"oracle", "boundary"}));
    subs[name] = sc;
  }
  CLI::App* rep = app.add_subcommand("report", "consolidate the run manifests under a directory");
  rep->add_option("dir", o.dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (rep->parsed()) return run_report(o);
  for (const auto& [name, sc] : subs)
    if (sc->parsed()) return run_stage(name, o);
  return 4;
}

}  // namespace nlw::app
