#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace nlw::app {

using json = nlohmann::json;

// One stage assertion: value op bound. criterion is the acceptance number or
// empty for stage-internal assertions.
struct Check {
  std::string criterion;
  std::string metric;
  double value = 0.0;
  std::string op;
  double bound = 0.0;
  bool pass = false;
};

Check make_check(const std::string& criterion, const std::string& metric, double value, const std::string& op,
                 double bound);

struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<json>> rows;
};

struct StageResult {
  std::string stage;
  json metrics = json::object();
  std::vector<Check> checks;
  std::vector<Table> tables;
  std::vector<std::string> snapshots;
  double seconds = 0.0;
  bool passed() const;
};

// out empty: no snapshots are written.
struct Context {
  std::string out;
  int jobs = 1;
  std::vector<std::string> modes;  // reconstruct only; empty uses the config
};

json default_config();
// Merges user over the defaults; unknown fields and type mismatches throw a
// config error naming the field path.
json resolve_config(const json& user);
json parse_config_text(const std::string& text, const std::string& origin);
std::string config_hash(const json& resolved);

StageResult run_simulate(const json& cfg, const Context& ctx);
StageResult run_expand(const json& cfg, const Context& ctx);
StageResult run_spectral(const json& cfg, const Context& ctx);
StageResult run_laplace(const json& cfg, const Context& ctx);
StageResult run_cgo(const json& cfg, const Context& ctx);
StageResult run_asymptotic(const json& cfg, const Context& ctx);
StageResult run_reconstruct(const json& cfg, const Context& ctx);

const char* toolkit_version();

int run_cli(int argc, char** argv);

}  // namespace nlw::app
