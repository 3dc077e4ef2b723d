#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "levyref/errors.hpp"
#include "levyref/levy_model.hpp"
#include "levyref/rate_profile.hpp"
#include "levyref/simulate.hpp"

namespace levyref {

inline constexpr const char* kLibraryVersion = "levyref 0.1.0";

enum class TaskKind { Scale, Exit, Resolvent, Ruin, Simulate, Converge };

inline const char* task_name(TaskKind k) {
  switch (k) {
    case TaskKind::Scale: return "scale";
    case TaskKind::Exit: return "exit";
    case TaskKind::Resolvent: return "resolvent";
    case TaskKind::Ruin: return "ruin";
    case TaskKind::Simulate: return "simulate";
    case TaskKind::Converge: return "converge";
  }
  return "unknown";
}

struct TaskSpec {
  TaskKind kind = TaskKind::Scale;
  std::string functional;           // exit and simulate tasks
  std::string variant;              // resolvent variant / occupation kill rule
  std::string method = "analytic";  // exit and ruin tasks: analytic | mc
  std::vector<std::string> methods; // compare subcommand: the two routes
  double x = 0.0;
  double d = 0.0;
  double a = 0.0;
  double window_lo = 0.0; // simulate occupation window
  double window_hi = 0.0;
  std::vector<double> points; // scale/ruin abscissas, resolvent levels
  int n_lo = 2;               // converge refinement range
  int n_hi = 6;
};

struct NumericBlock {
  double q = 0.0;
  double h = 1.0 / 512.0;
  double x_max = 0.0;     // 0 means: derive from the task geometry
  double tolerance = 0.0; // 0 means: per-task default
  std::uint64_t seed = 0;
  std::uint64_t n_paths = 10000;
  double max_step = 1e-3;
  double horizon = 0.0;
  std::string scheme = "event_driven"; // or "euler"
};

struct OutputBlock {
  std::string stem;            // default: the task name
  std::string format = "csv";  // csv | json
  std::uint64_t dump_paths = 0;
};

struct RunConfig {
  LevyModel model;
  RateProfile profile = RateProfile::zero();
  TaskSpec task;
  NumericBlock numeric;
  OutputBlock output;
};

namespace detail {

using nlohmann::json;

[[noreturn]] inline void bad_config(const std::string& where, const std::string& what) {
  fail(ErrorKind::ConfigInvalid, where + ": " + what);
}

inline void check_keys(const json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad_config(where, "expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) known = known || item.key() == k;
    if (!known) bad_config(where, "unknown key '" + item.key() + "'");
  }
}

inline double get_number(const json& j, const std::string& where, const char* key,
                         bool required, double fallback = 0.0) {
  if (!j.contains(key)) {
    if (required) bad_config(where, std::string("missing key '") + key + "'");
    return fallback;
  }
  if (!j[key].is_number()) bad_config(where, std::string("'") + key + "' must be a number");
  return j[key].get<double>();
}

inline std::uint64_t get_u64(const json& j, const std::string& where, const char* key,
                             std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_unsigned())
    bad_config(where, std::string("'") + key + "' must be a nonnegative integer");
  return j[key].get<std::uint64_t>();
}

inline std::string get_string(const json& j, const std::string& where, const char* key,
                              bool required, const std::string& fallback = "") {
  if (!j.contains(key)) {
    if (required) bad_config(where, std::string("missing key '") + key + "'");
    return fallback;
  }
  if (!j[key].is_string()) bad_config(where, std::string("'") + key + "' must be a string");
  return j[key].get<std::string>();
}

inline std::vector<double> get_number_array(const json& j, const std::string& where,
                                            const char* key) {
  std::vector<double> out;
  if (!j.contains(key)) return out;
  if (!j[key].is_array()) bad_config(where, std::string("'") + key + "' must be an array");
  for (const auto& v : j[key]) {
    if (!v.is_number()) bad_config(where, std::string("'") + key + "' must hold numbers only");
    out.push_back(v.get<double>());
  }
  return out;
}

inline LevyModel parse_model(const json& j) {
  check_keys(j, "model", {"drift", "sigma", "jumps", "name"});
  LevyModel m;
  m.drift = get_number(j, "model", "drift", true);
  m.sigma = get_number(j, "model", "sigma", false, 0.0);
  m.name = get_string(j, "model", "name", false);
  if (j.contains("jumps")) {
    const json& jj = j["jumps"];
    check_keys(jj, "model.jumps", {"kind", "intensity", "rate", "weights", "rates"});
    std::string kind = get_string(jj, "model.jumps", "kind", true);
    if (kind == "none") {
      m.jumps = JumpSpec::none();
    } else if (kind == "exponential") {
      m.jumps = JumpSpec::exponential(get_number(jj, "model.jumps", "intensity", true),
                                      get_number(jj, "model.jumps", "rate", true));
    } else if (kind == "hyperexponential") {
      m.jumps = JumpSpec::hyperexponential(get_number(jj, "model.jumps", "intensity", true),
                                           get_number_array(jj, "model.jumps", "weights"),
                                           get_number_array(jj, "model.jumps", "rates"));
    } else {
      bad_config("model.jumps", "kind must be none, exponential, or hyperexponential");
    }
  }
  m.check_valid();
  return m;
}

inline RateProfile parse_profile(const json& j) {
  check_keys(j, "profile",
             {"kind", "barriers", "deltas", "delta_max", "beta", "alpha", "eps_blend"});
  std::string kind = get_string(j, "profile", "kind", true);
  if (kind == "zero") return RateProfile::zero();
  if (kind == "step")
    return RateProfile::step(get_number_array(j, "profile", "barriers"),
                             get_number_array(j, "profile", "deltas"));
  if (kind == "smooth_saturating")
    return RateProfile::smooth_saturating(get_number(j, "profile", "delta_max", true),
                                          get_number(j, "profile", "beta", true));
  if (kind == "smooth_linear_clamp")
    return RateProfile::smooth_linear_clamp(get_number(j, "profile", "alpha", true),
                                            get_number(j, "profile", "delta_max", true),
                                            get_number(j, "profile", "eps_blend", true));
  bad_config("profile", "kind must be zero, step, smooth_saturating, or smooth_linear_clamp");
}

inline TaskSpec parse_task(const json& j) {
  check_keys(j, "task",
             {"kind", "functional", "variant", "method", "methods", "x", "d", "a", "window_lo",
              "window_hi", "points", "n_lo", "n_hi"});
  TaskSpec t;
  std::string kind = get_string(j, "task", "kind", true);
  if (kind == "scale") t.kind = TaskKind::Scale;
  else if (kind == "exit") t.kind = TaskKind::Exit;
  else if (kind == "resolvent") t.kind = TaskKind::Resolvent;
  else if (kind == "ruin") t.kind = TaskKind::Ruin;
  else if (kind == "simulate") t.kind = TaskKind::Simulate;
  else if (kind == "converge") t.kind = TaskKind::Converge;
  else bad_config("task", "kind must be scale, exit, resolvent, ruin, simulate, or converge");

  t.functional = get_string(j, "task", "functional", false);
  t.variant = get_string(j, "task", "variant", false);
  t.method = get_string(j, "task", "method", false, "analytic");
  if (t.method != "analytic" && t.method != "mc")
    bad_config("task", "method must be analytic or mc");
  if (j.contains("methods")) {
    if (!j["methods"].is_array() || j["methods"].size() != 2)
      bad_config("task", "'methods' must name exactly two routes");
    for (const auto& v : j["methods"]) {
      if (!v.is_string()) bad_config("task", "'methods' must hold strings");
      t.methods.push_back(v.get<std::string>());
    }
  }
  t.x = get_number(j, "task", "x", false);
  t.d = get_number(j, "task", "d", false);
  t.a = get_number(j, "task", "a", false);
  t.window_lo = get_number(j, "task", "window_lo", false);
  t.window_hi = get_number(j, "task", "window_hi", false);
  t.points = get_number_array(j, "task", "points");
  t.n_lo = static_cast<int>(get_number(j, "task", "n_lo", false, 2.0));
  t.n_hi = static_cast<int>(get_number(j, "task", "n_hi", false, 6.0));
  return t;
}

inline NumericBlock parse_numeric(const json& j) {
  check_keys(j, "numeric",
             {"q", "h", "x_max", "tolerance", "seed", "n_paths", "max_step", "horizon",
              "scheme"});
  NumericBlock n;
  n.q = get_number(j, "numeric", "q", false, n.q);
  n.h = get_number(j, "numeric", "h", false, n.h);
  n.x_max = get_number(j, "numeric", "x_max", false, n.x_max);
  n.tolerance = get_number(j, "numeric", "tolerance", false, n.tolerance);
  n.seed = get_u64(j, "numeric", "seed", n.seed);
  n.n_paths = get_u64(j, "numeric", "n_paths", n.n_paths);
  n.max_step = get_number(j, "numeric", "max_step", false, n.max_step);
  n.horizon = get_number(j, "numeric", "horizon", false, n.horizon);
  n.scheme = get_string(j, "numeric", "scheme", false, n.scheme);
  if (n.scheme != "event_driven" && n.scheme != "euler")
    bad_config("numeric", "scheme must be event_driven or euler");
  require(n.q >= 0.0, ErrorKind::ConfigInvalid, "numeric: q must be nonnegative");
  require(n.h > 0.0, ErrorKind::ConfigInvalid, "numeric: h must be positive");
  require(n.x_max >= 0.0, ErrorKind::ConfigInvalid, "numeric: x_max must be nonnegative");
  require(n.tolerance >= 0.0, ErrorKind::ConfigInvalid, "numeric: tolerance must be nonnegative");
  require(n.n_paths > 0, ErrorKind::ConfigInvalid, "numeric: n_paths must be positive");
  require(n.max_step > 0.0, ErrorKind::ConfigInvalid, "numeric: max_step must be positive");
  require(n.horizon >= 0.0, ErrorKind::ConfigInvalid, "numeric: horizon must be nonnegative");
  return n;
}

inline OutputBlock parse_output(const json& j, const TaskSpec& task) {
  check_keys(j, "output", {"stem", "format", "dump_paths"});
  OutputBlock o;
  o.stem = get_string(j, "output", "stem", false, task_name(task.kind));
  o.format = get_string(j, "output", "format", false, o.format);
  o.dump_paths = get_u64(j, "output", "dump_paths", o.dump_paths);
  if (o.format != "csv" && o.format != "json")
    bad_config("output", "format must be csv or json");
  if (o.stem.empty() || o.stem.find('/') != std::string::npos)
    bad_config("output", "stem must be a bare file name");
  return o;
}

inline json jumps_to_json(const JumpSpec& jumps) {
  json j;
  if (jumps.empty()) {
    j["kind"] = "none";
  } else if (jumps.phases() == 1) {
    j["kind"] = "exponential";
    j["intensity"] = jumps.intensity;
    j["rate"] = jumps.rates[0];
  } else {
    j["kind"] = "hyperexponential";
    j["intensity"] = jumps.intensity;
    j["weights"] = jumps.weights;
    j["rates"] = jumps.rates;
  }
  return j;
}

inline json profile_to_json(const RateProfile& p) {
  json j;
  switch (p.kind()) {
    case RateProfile::Kind::Zero: j["kind"] = "zero"; break;
    case RateProfile::Kind::Step:
      j["kind"] = "step";
      j["barriers"] = p.barriers();
      j["deltas"] = p.deltas();
      break;
    case RateProfile::Kind::SmoothSaturating:
      j["kind"] = "smooth_saturating";
      j["delta_max"] = p.delta_max();
      j["beta"] = p.beta();
      break;
    case RateProfile::Kind::SmoothLinearClamp:
      j["kind"] = "smooth_linear_clamp";
      j["alpha"] = p.alpha();
      j["delta_max"] = p.delta_max();
      j["eps_blend"] = p.eps_blend();
      break;
  }
  return j;
}

} // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  detail::check_keys(j, "config", {"model", "profile", "task", "numeric", "output"});
  if (!j.contains("model")) detail::bad_config("config", "missing key 'model'");
  if (!j.contains("task")) detail::bad_config("config", "missing key 'task'");
  RunConfig cfg;
  cfg.model = detail::parse_model(j["model"]);
  if (j.contains("profile")) cfg.profile = detail::parse_profile(j["profile"]);
  cfg.task = detail::parse_task(j["task"]);
  if (j.contains("numeric")) cfg.numeric = detail::parse_numeric(j["numeric"]);
  cfg.output = detail::parse_output(j.contains("output") ? j["output"] : nlohmann::json::object(),
                                    cfg.task);
  AdmissibilityReport rep = validate(cfg.model, cfg.profile);
  for (const auto& c : rep.checks)
    require(c.pass, ErrorKind::ConfigInvalid, "admissibility: " + c.condition + " (" + c.detail + ")");
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::IoError, "cannot read config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ConfigInvalid, std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

// Canonical form: every block present, every default materialized, keys in
// sorted order. Parsing the canonical dump reproduces the same configuration.
inline nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["model"]["drift"] = cfg.model.drift;
  j["model"]["sigma"] = cfg.model.sigma;
  j["model"]["name"] = cfg.model.name;
  j["model"]["jumps"] = detail::jumps_to_json(cfg.model.jumps);
  j["profile"] = detail::profile_to_json(cfg.profile);

  nlohmann::json& t = j["task"];
  t["kind"] = task_name(cfg.task.kind);
  t["functional"] = cfg.task.functional;
  t["variant"] = cfg.task.variant;
  t["method"] = cfg.task.method;
  // Comparison routes are optional; an empty list would not reparse.
  if (!cfg.task.methods.empty()) t["methods"] = cfg.task.methods;
  t["x"] = cfg.task.x;
  t["d"] = cfg.task.d;
  t["a"] = cfg.task.a;
  t["window_lo"] = cfg.task.window_lo;
  t["window_hi"] = cfg.task.window_hi;
  t["points"] = cfg.task.points;
  t["n_lo"] = cfg.task.n_lo;
  t["n_hi"] = cfg.task.n_hi;

  nlohmann::json& n = j["numeric"];
  n["q"] = cfg.numeric.q;
  n["h"] = cfg.numeric.h;
  n["x_max"] = cfg.numeric.x_max;
  n["tolerance"] = cfg.numeric.tolerance;
  n["seed"] = cfg.numeric.seed;
  n["n_paths"] = cfg.numeric.n_paths;
  n["max_step"] = cfg.numeric.max_step;
  n["horizon"] = cfg.numeric.horizon;
  n["scheme"] = cfg.numeric.scheme;

  nlohmann::json& o = j["output"];
  o["stem"] = cfg.output.stem;
  o["format"] = cfg.output.format;
  o["dump_paths"] = cfg.output.dump_paths;
  return j;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string canonical_dump(const RunConfig& cfg) { return to_json(cfg).dump(); }

inline std::string config_hash(const RunConfig& cfg) {
  return hash_hex(fnv1a64(canonical_dump(cfg)));
}

inline std::string model_hash(const LevyModel& m) {
  nlohmann::json j;
  j["drift"] = m.drift;
  j["sigma"] = m.sigma;
  j["jumps"] = detail::jumps_to_json(m.jumps);
  return hash_hex(fnv1a64(j.dump()));
}

inline std::string profile_hash(const RateProfile& p) {
  return hash_hex(fnv1a64(detail::profile_to_json(p).dump()));
}

inline Scheme scheme_of(const NumericBlock& n) {
  return n.scheme == "euler" ? Scheme::EulerJumpDiffusion : Scheme::EventDriven;
}

inline ExitFunctional functional_of(const std::string& name) {
  if (name == "two_sided_up") return ExitFunctional::TwoSidedUp;
  if (name == "two_sided_down") return ExitFunctional::TwoSidedDown;
  if (name == "one_sided_up") return ExitFunctional::OneSidedUp;
  if (name == "one_sided_down") return ExitFunctional::OneSidedDown;
  fail(ErrorKind::ConfigInvalid,
       "functional must be two_sided_up, two_sided_down, one_sided_up, or one_sided_down");
}

inline ResolventVariant variant_of(const std::string& name) {
  if (name == "two_barrier") return ResolventVariant::TwoBarrier;
  if (name == "lower_only") return ResolventVariant::LowerOnly;
  if (name == "upper_only") return ResolventVariant::UpperOnly;
  if (name == "free") return ResolventVariant::Free;
  fail(ErrorKind::ConfigInvalid, "variant must be two_barrier, lower_only, upper_only, or free");
}

} // namespace levyref
