#include "depin/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "depin/errors.hpp"

namespace depin {

using nlohmann::json;

namespace {

enum class Kind { Number, Count, Seed, OptNumber, List, Text };

struct KeySpec {
  const char* name;
  Kind kind;
};

constexpr KeySpec kKeys[] = {
    {"rho", Kind::Number},          {"r0", Kind::Number},
    {"r1", Kind::Number},           {"f", Kind::Number},
    {"seed", Kind::Seed},           {"tau", Kind::Number},
    {"epsilon", Kind::Number},      {"width", Kind::Number},
    {"width_spacings", Kind::Number}, {"dx", Kind::Number},
    {"dt", Kind::Number},           {"cfl_factor", Kind::Number},
    {"t_max", Kind::Number},        {"h_ballistic", Kind::Number},
    {"pinned_confirm_steps", Kind::Count}, {"tol_v", Kind::Number},
    {"slope_max", Kind::Number},    {"snapshot_stride", Kind::Count},
    {"F", Kind::OptNumber},         {"F_lo", Kind::OptNumber},
    {"F_hi", Kind::OptNumber},      {"tol_f", Kind::Number},
    {"max_iter", Kind::Count},      {"doubling_cap", Kind::Count},
    {"densities", Kind::List},      {"n_seeds", Kind::Count},
    {"out", Kind::Text},            {"workers", Kind::Count},
    {"p_c", Kind::Number},          {"bootstrap", Kind::Count},
    {"path_h_min", Kind::Number},   {"path_height", Kind::Number},
    {"j_max", Kind::Count},
};

const KeySpec* find_key(const std::string& name) {
  for (const auto& k : kKeys) {
    if (name == k.name) return &k;
  }
  return nullptr;
}

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ValidationError("config key '" + key + "': " + what);
}

double as_number(const std::string& key, const json& v) {
  if (!v.is_number()) bad(key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad(key, "must be finite");
  return d;
}

std::size_t as_count(const std::string& key, const json& v) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) bad(key, "expected a non-negative integer");
  if (v.is_number_integer() && v.get<std::int64_t>() < 0) bad(key, "expected a non-negative integer");
  return v.get<std::size_t>();
}

void apply(ExperimentConfig& c, const std::string& key, const json& v) {
  const KeySpec* spec = find_key(key);
  if (spec == nullptr) bad(key, "unknown key");
  if (spec->kind == Kind::OptNumber && v.is_null()) {
    if (key == "F") c.force.reset();
    if (key == "F_lo") c.bisection.f_lo.reset();
    if (key == "F_hi") c.bisection.f_hi.reset();
    return;
  }
  switch (spec->kind) {
    case Kind::Number:
    case Kind::OptNumber: {
      const double d = as_number(key, v);
      if (key == "rho") c.obstacles.rho = d;
      else if (key == "r0") c.obstacles.r0 = d;
      else if (key == "r1") c.obstacles.r1 = d;
      else if (key == "f") c.obstacles.f = d;
      else if (key == "tau") c.kinetics.tau = d;
      else if (key == "epsilon") c.kinetics.epsilon = d;
      else if (key == "width") c.width = d;
      else if (key == "width_spacings") c.width_spacings = d;
      else if (key == "dx") c.sim.dx = d;
      else if (key == "dt") c.sim.dt = d;
      else if (key == "cfl_factor") c.sim.cfl_factor = d;
      else if (key == "t_max") c.sim.t_max = d;
      else if (key == "h_ballistic") c.sim.h_ballistic = d;
      else if (key == "tol_v") c.sim.tol_v = d;
      else if (key == "slope_max") c.sim.slope_max = d;
      else if (key == "F") c.force = d;
      else if (key == "F_lo") c.bisection.f_lo = d;
      else if (key == "F_hi") c.bisection.f_hi = d;
      else if (key == "tol_f") c.bisection.tol_f = d;
      else if (key == "p_c") c.p_c = d;
      else if (key == "path_h_min") c.path_h_min = d;
      else if (key == "path_height") c.path_height = d;
      break;
    }
    case Kind::Count: {
      const std::size_t n = as_count(key, v);
      if (key == "pinned_confirm_steps") c.sim.pinned_confirm_steps = static_cast<int>(n);
      else if (key == "snapshot_stride") c.sim.snapshot_stride = n;
      else if (key == "max_iter") c.bisection.max_iter = static_cast<int>(n);
      else if (key == "doubling_cap") c.bisection.doubling_cap = static_cast<int>(n);
      else if (key == "n_seeds") c.n_seeds = n;
      else if (key == "workers") c.workers = n;
      else if (key == "bootstrap") c.bootstrap = n;
      else if (key == "j_max") c.j_max = static_cast<int>(n);
      break;
    }
    case Kind::Seed:
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        bad(key, "expected a non-negative integer");
      }
      c.obstacles.seed = v.get<std::uint64_t>();
      break;
    case Kind::List: {
      if (!v.is_array() || v.empty()) bad(key, "expected a non-empty array of numbers");
      c.densities.clear();
      for (const auto& e : v) c.densities.push_back(as_number(key, e));
      break;
    }
    case Kind::Text:
      if (!v.is_string()) bad(key, "expected a string");
      c.out = v.get<std::string>();
      break;
  }
}

// Rethrows a validation message with the config keys it concerns.
template <class Fn>
void check(const char* keys, Fn&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("config (") + keys + "): " + e.what());
  }
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& s : kKeys) k.emplace_back(s.name);
    return k;
  }();
  return keys;
}

void ExperimentConfig::validate() const {
  check("rho, r0, r1, f", [&] { obstacles.validate(); });
  check("tau, epsilon", [&] { kinetics.validate(); });
  check("cfl_factor, t_max, pinned_confirm_steps, tol_v, slope_max", [&] { sim.validate(); });
  check("F_lo, F_hi, tol_f, max_iter, doubling_cap", [&] { bisection.validate(); });
  if (sim.dx < 0.0) bad("dx", "must be >= 0 (0 selects the default)");
  if (sim.dt < 0.0) bad("dt", "must be >= 0 (0 selects the CFL default)");
  if (width < 0.0) bad("width", "must be >= 0 (0 selects width_spacings / sqrt(rho))");
  if (!(width_spacings > 0.0)) bad("width_spacings", "must be > 0");
  for (double d : densities) {
    if (!(d > 0.0)) bad("densities", "every density must be > 0");
  }
  if (n_seeds == 0) bad("n_seeds", "must be >= 1");
  if (!(p_c > 0.0 && p_c < 1.0)) bad("p_c", "must lie in (0, 1)");
  if (path_h_min < 0.0) bad("path_h_min", "must be >= 0");
  if (path_height < 0.0) bad("path_height", "must be >= 0");
  if (j_max < 1) bad("j_max", "must be >= 1");
  if (out.empty()) bad("out", "must not be empty");
  const double dx = sim.dx > 0.0 ? sim.dx : default_dx(obstacles);
  check("dt, cfl_factor, epsilon, dx", [&] { resolved_dt(sim, kinetics, dx); });
}

double ExperimentConfig::resolved_width() const {
  return width > 0.0 ? width : width_spacings / std::sqrt(obstacles.rho);
}

json ExperimentConfig::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["rho"] = obstacles.rho;
  j["r0"] = obstacles.r0;
  j["r1"] = obstacles.r1;
  j["f"] = obstacles.f;
  j["seed"] = obstacles.seed;
  j["tau"] = kinetics.tau;
  j["epsilon"] = kinetics.epsilon;
  j["width"] = width;
  j["width_spacings"] = width_spacings;
  j["dx"] = sim.dx;
  j["dt"] = sim.dt;
  j["cfl_factor"] = sim.cfl_factor;
  j["t_max"] = sim.t_max;
  j["h_ballistic"] = sim.h_ballistic;
  j["pinned_confirm_steps"] = sim.pinned_confirm_steps;
  j["tol_v"] = sim.tol_v;
  j["slope_max"] = sim.slope_max;
  j["snapshot_stride"] = sim.snapshot_stride;
  j["F"] = opt(force);
  j["F_lo"] = opt(bisection.f_lo);
  j["F_hi"] = opt(bisection.f_hi);
  j["tol_f"] = bisection.tol_f;
  j["max_iter"] = bisection.max_iter;
  j["doubling_cap"] = bisection.doubling_cap;
  j["densities"] = densities;
  j["n_seeds"] = n_seeds;
  j["out"] = out;
  j["workers"] = workers;
  j["p_c"] = p_c;
  j["bootstrap"] = bootstrap;
  j["path_h_min"] = path_h_min;
  j["path_height"] = path_height;
  j["j_max"] = j_max;
  return j;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ExperimentConfig::hash() const {
  json j = to_json();
  j.erase("workers");
  j.erase("out");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

SweepConfig ExperimentConfig::sweep() const {
  SweepConfig s;
  s.base = obstacles;
  s.densities = densities;
  s.n_seeds = n_seeds;
  s.master_seed = obstacles.seed;
  s.width_spacings = width_spacings;
  s.kinetics = kinetics;
  s.sim = sim;
  s.bisection = bisection;
  s.workers = workers;
  s.bootstrap = bootstrap;
  return s;
}

SandwichConfig ExperimentConfig::sandwich() const {
  SandwichConfig s;
  s.barrier.j_max = j_max;
  s.path_h_min = path_h_min;
  s.path_height = path_height;
  return s;
}

ExperimentConfig parse_config(const json& file, const json& overrides) {
  ExperimentConfig c;
  if (!file.is_null()) {
    if (!file.is_object()) throw ValidationError("config file must hold a JSON object");
    for (const auto& [key, value] : file.items()) apply(c, key, value);
  }
  if (!overrides.is_null()) {
    if (!overrides.is_object()) throw ValidationError("overrides must be a JSON object");
    for (const auto& [key, value] : overrides.items()) {
      apply(c, key, value);
      if (key == "workers" || key == "out") continue;  // execution-only
      json entry{{"value", value}};
      if (file.is_object() && file.contains(key)) entry["file_value"] = file.at(key);
      c.provenance[key] = entry;
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path, const json& overrides) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file " + path);
  json file;
  try {
    file = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config file " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(file, overrides);
}

json flag_value(const std::string& key, const std::string& text) {
  const KeySpec* spec = find_key(key);
  if (spec == nullptr) bad(key, "unknown key");
  if (spec->kind == Kind::Text) return text;
  if (spec->kind == Kind::List) {
    json arr = json::array();
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        arr.push_back(json::parse(item));
      } catch (const json::parse_error&) {
        bad(key, "cannot parse list element '" + item + "'");
      }
    }
    return arr;
  }
  if (spec->kind == Kind::OptNumber && (text == "null" || text.empty())) return nullptr;
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    bad(key, "cannot parse value '" + text + "'");
  }
}

}  // namespace depin
