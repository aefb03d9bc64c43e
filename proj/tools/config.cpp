#include <cstdio>

#include "app.hpp"
#include "nlwave/error.hpp"

namespace nlw::app {

namespace {

json bump(int j, int k, int l, double amp) {
  return {{"j", j}, {"k", k}, {"l", l}, {"center", {0.5, 0.5, 0.5}}, {"radius", 0.25}, {"amp", amp}};
}

std::string type_name(const json& v) {
  if (v.is_number_integer()) return "integer";
  if (v.is_number()) return "number";
  return v.type_name();
}

json merge(const json& def, const json& user, const std::string& path) {
  auto fail = [&](const std::string& what) { throw config_error("config", path + ": " + what); };
  if (def.is_object()) {
    if (!user.is_object()) fail("expected object, got " + type_name(user));
    json out = def;
    for (const auto& [key, value] : user.items()) {
      const std::string sub = path.empty() ? key : path + "." + key;
      if (!def.contains(key)) throw config_error("config", sub + ": unknown field");
      out[key] = merge(def[key], value, sub);
    }
    return out;
  }
  if (def.is_array()) {
    if (!user.is_array()) fail("expected array, got " + type_name(user));
    json out = json::array();
    for (size_t i = 0; i < user.size(); ++i) {
      const std::string sub = path + "[" + std::to_string(i) + "]";
      out.push_back(def.empty() ? user[i] : merge(def[0], user[i], sub));
    }
    return out;
  }
  if (def.is_number_integer()) {
    if (!user.is_number_integer()) fail("expected integer, got " + type_name(user));
    return user;
  }
  if (def.is_number()) {
    if (!user.is_number()) fail("expected number, got " + type_name(user));
    return json(user.get<double>());
  }
  if (def.is_boolean() && !user.is_boolean()) fail("expected boolean, got " + type_name(user));
  if (def.is_string() && !user.is_string()) fail("expected string, got " + type_name(user));
  return user;
}

}  // namespace

json default_config() {
  json c;
  c["seed"] = 0;
  c["output"] = "runs/default";
  c["simulate"] = {{"n", 2},         {"dims", 33},          {"recipe", "single_c_bump"},
                   {"gamma_bump", true}, {"remainder", true}, {"epsilon", 1e-2},
                   {"horizon", 1.5}, {"ramp_t0", 0.8},      {"dt_factor", 0.8},
                   {"snapshots", 4}};
  c["expand"] = {{"n", 2},
                 {"dims", 33},
                 {"recipe", "single_c_bump"},
                 {"gamma_bump", true},
                 {"remainder", true},
                 {"epsilons", {1e-2, 5e-3, 2.5e-3}},
                 {"horizon", 1.5},
                 {"ramp_t0", 0.8},
                 {"dt_factor", 0.8},
                 {"min_slope", 2.7},
                 {"max_seconds", 120.0}};
  c["spectral"] = {
      {"equivalence", {{"dims", 25}, {"horizon", 1.6}, {"dt_factor", 0.0625}, {"tol", 1e-3}}},
      {"polarization", {{"dims", 13}, {"horizon", 1.6}, {"delays", {0.125, 0.25, 0.5}}, {"tol", 1e-8}}},
      {"u2m1",
       {{"dims", 13},
        {"horizon", 2.0},
        {"dt_factors", {0.25, 0.125}},
        {"tol", 1e-2},
        {"growth_horizon", 4.8},
        {"growth_dt_factor", 0.5}}}};
  c["laplace"] = {
      {"chi", {{"mu", 3}, {"t0", 1.0}, {"dt", 1e-4}, {"steps", 10000}, {"taus", {4.0, 8.0, 16.0, 32.0, 64.0}},
               {"max_slope", -0.9}}},
      {"identity", {{"dims", 13}, {"horizon", 8.5}, {"dt_factor", 0.5}, {"tau", 8.0}, {"null_tol", 1e-6},
                    {"oracle_tol", 1e-10}}},
      {"dominance", {{"taus", {4.0, 8.0, 16.0, 32.0}}, {"max_slope", 0.0}}}};
  c["cgo"] = {{"dims", 17},
              {"tau", 2.0},
              {"a", {2.0, 0.0, 0.0}},
              {"s_values", {4.0, 8.0, 16.0, 32.0}},
              {"residual_tol", 1e-6},
              {"max_slope", -0.8},
              {"fd_s", 8.0},
              {"fd_deltas", {0.2, 0.1, 0.05}},
              {"fd_order_tol", 0.2},
              {"family", {{"tau", 1.0}, {"r_values", {1.0, 2.0, 4.0, 8.0}}, {"threshold", 0.25}}},
              {"vanishing",
               {{"dims", 16}, {"tau", 1.0}, {"a", {0.0, 0.0, 6.283185307179586}}, {"s_values", {8.0, 16.0, 32.0}}}}};
  c["asymptotic"] = {{"n", 2},
                     {"nt", 32},
                     {"normal", 1200},
                     {"taus", {8.0, 16.0, 32.0, 64.0}},
                     {"constant_gamma", 1.5},
                     {"normal_slope", 0.5},
                     {"tangential_amplitudes", {0.0, 0.1}},
                     {"floor_tol", 2e-4},
                     {"slope_gap", 0.7}};
  c["reconstruct"] = {{"dims", 16},
                      {"tau", 1.0},
                      {"s_values", {8.0, 16.0, 32.0}},
                      {"a_max", -1.0},
                      {"boundary_s_values", {8.0}},
                      {"boundary_a_max", 19.0},
                      {"spread_tol", 0.1},
                      {"family_r", 3.0},
                      {"basis_ticks", {0.3, 0.5, 0.7}},
                      {"basis_radius", 0.25},
                      {"truths", {bump(0, 0, 1, 0.5), bump(1, 1, 1, 0.5)}},
                      {"calibration", bump(2, 0, 2, 0.5)},
                      {"modes", {"oracle", "boundary"}},
                      {"oracle_tol", 0.05},
                      {"boundary_tol", 0.1},
                      {"max_seconds", 1800.0},
                      {"symmetry", {{"dims", 16}, {"a_max", 7.0}, {"truth", bump(1, 0, 2, 0.5)}, {"epsilon", 1e-2},
                                    {"horizon", 0.6}}}};
  return c;
}

json resolve_config(const json& user) { return merge(default_config(), user, ""); }

json parse_config_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw config_error("config", origin + ": parse error at byte " + std::to_string(e.byte));
  }
}

// FNV-1a over the canonical dump; object keys are sorted, numbers round-trip.
std::string config_hash(const json& resolved) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : resolved.dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace nlw::app
