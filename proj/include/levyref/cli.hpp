#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "levyref/config.hpp"
#include "levyref/fluctuation.hpp"
#include "levyref/simulate.hpp"
#include "levyref/volterra.hpp"

namespace levyref {

struct CliOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::string format; // empty: honor the config's output block
  bool has_seed_override = false;
  std::uint64_t seed_override = 0;
  bool quiet = false;
};

namespace cli_detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::ConfigInvalid:
    case ErrorKind::IoError:
    case ErrorKind::NonMonotoneProfile:
    case ErrorKind::DomainError:
    case ErrorKind::SchemeModelMismatch:
    case ErrorKind::QueryOutsideGrid:
    case ErrorKind::BreakpointMisaligned:
      return 2; // the inputs were rejected before any numerics ran off course
    default:
      return 3; // a numerical routine gave up
  }
}

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::IoError, "cannot open " + path + " for writing");
  out << content;
  require(out.good(), ErrorKind::IoError, "short write to " + path);
}

struct Artifacts {
  std::string out_dir;
  std::string config_hash;
  bool quiet = false;
  std::vector<std::string> written;

  std::string path_for(const std::string& name) const { return out_dir + "/" + name; }

  void emit(const std::string& name, const std::string& content) {
    std::string p = path_for(name);
    write_text(p, content);
    written.push_back(p);
    if (!quiet) std::printf("wrote %s\n", p.c_str());
  }

  std::string provenance() const {
    return std::string("# ") + kLibraryVersion + " config=" + config_hash + "\n";
  }

  void emit_json(const std::string& name, nlohmann::json j) {
    j["library"] = kLibraryVersion;
    j["config_hash"] = config_hash;
    emit(name, j.dump(2) + "\n");
  }
};

inline double derive_x_max(const RunConfig& cfg) {
  if (cfg.numeric.x_max > 0.0) return cfg.numeric.x_max;
  double m = std::max({cfg.task.x, cfg.task.a, cfg.task.window_hi, 0.0});
  for (double p : cfg.task.points) m = std::max(m, p);
  if (cfg.profile.levels() > 0) m = std::max(m, cfg.profile.barriers().back());
  return std::ceil(m) + 4.0;
}

inline PathConfig path_config(const RunConfig& cfg) {
  PathConfig pc;
  pc.horizon = cfg.numeric.horizon;
  pc.max_step = cfg.numeric.max_step;
  pc.seed = cfg.numeric.seed;
  pc.scheme = scheme_of(cfg.numeric);
  return pc;
}

inline double analytic_exit(const RunConfig& cfg, const ExitQuery& qr, double h,
                            double x_max) {
  ScaleSet s = make_scale_set(cfg.model, cfg.profile, cfg.numeric.q, cfg.task.d, h, x_max);
  switch (functional_of(cfg.task.functional)) {
    case ExitFunctional::TwoSidedUp: return two_sided_up(qr, s);
    case ExitFunctional::TwoSidedDown: return two_sided_down(qr, s);
    case ExitFunctional::OneSidedUp: return one_sided_up(qr, s);
    case ExitFunctional::OneSidedDown: return one_sided_down(qr, s);
  }
  fail(ErrorKind::ConfigInvalid, "unreachable functional");
}

// One (quantity, x, d, a, q, value, method, error_budget) table.
struct ResultRow {
  std::string quantity;
  double x = 0.0, d = 0.0, a = 0.0, q = 0.0, value = 0.0;
  std::string method;
  double error_budget = 0.0;
};

inline void emit_result_rows(Artifacts& art, const RunConfig& cfg,
                             const std::vector<ResultRow>& rows) {
  if (cfg.output.format == "csv") {
    std::string body = art.provenance();
    body += "quantity,x,d,a,q,value,method,error_budget\n";
    for (const auto& r : rows)
      body += r.quantity + "," + fmt17(r.x) + "," + fmt17(r.d) + "," + fmt17(r.a) + "," +
              fmt17(r.q) + "," + fmt17(r.value) + "," + r.method + "," +
              fmt17(r.error_budget) + "\n";
    art.emit(cfg.output.stem + ".csv", body);
    return;
  }
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows)
    j["rows"].push_back({{"quantity", r.quantity},
                         {"x", r.x},
                         {"d", r.d},
                         {"a", r.a},
                         {"q", r.q},
                         {"value", r.value},
                         {"method", r.method},
                         {"error_budget", r.error_budget}});
  art.emit_json(cfg.output.stem + ".json", j);
}

inline void run_scale(const RunConfig& cfg, Artifacts& art) {
  double x_max = derive_x_max(cfg);
  double h = cfg.numeric.h;
  double d = cfg.task.d;
  double steps = d / h;
  require(std::abs(steps - std::round(steps)) <= 1e-9 * std::max(1.0, std::abs(steps)),
          ErrorKind::ConfigInvalid, "scale task needs the lower level d on the h lattice");
  ScaleSet s = make_scale_set(cfg.model, cfg.profile, cfg.numeric.q, d, h, x_max);

  // Rows are the w-grid nodes; z and u share the lattice but may start at 0,
  // in which case their closed-form extensions fill the part below.
  auto deriv_of = [&](const GridFn& g, double x, double below) {
    if (x < g.origin - 1e-12) return below;
    return g.right_derivs[g.node_of(x)];
  };
  struct Row {
    double x, w, wp, z, zp, u, up;
  };
  std::vector<Row> rows;
  rows.reserve(s.w.n_nodes());
  for (std::size_t i = 0; i < s.w.n_nodes(); ++i) {
    double x = s.w.x_at(i);
    Row r;
    r.x = x;
    r.w = s.w.values[i];
    r.wp = s.w.right_derivs[i];
    r.z = x < s.z.origin - 1e-12 ? 1.0 : s.z.values[s.z.node_of(x)];
    r.zp = deriv_of(s.z, x, 0.0);
    r.u = x < s.u.origin - 1e-12 ? std::exp(s.phi_q * x) : s.u.values[s.u.node_of(x)];
    r.up = deriv_of(s.u, x, s.phi_q * std::exp(s.phi_q * x));
    rows.push_back(r);
  }

  if (cfg.output.format == "csv") {
    std::string body = art.provenance();
    body += "# model=" + model_hash(cfg.model) + " profile=" + profile_hash(cfg.profile) +
            " q=" + fmt17(cfg.numeric.q) + " h=" + fmt17(h) + "\n";
    body += "x,w,w_prime,z,z_prime,u,u_prime\n";
    for (const auto& r : rows)
      body += fmt17(r.x) + "," + fmt17(r.w) + "," + fmt17(r.wp) + "," + fmt17(r.z) + "," +
              fmt17(r.zp) + "," + fmt17(r.u) + "," + fmt17(r.up) + "\n";
    art.emit(cfg.output.stem + ".csv", body);
    return;
  }
  nlohmann::json j;
  j["model_hash"] = model_hash(cfg.model);
  j["profile_hash"] = profile_hash(cfg.profile);
  j["q"] = cfg.numeric.q;
  j["h"] = h;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows)
    j["rows"].push_back({{"x", r.x},
                         {"w", r.w},
                         {"w_prime", r.wp},
                         {"z", r.z},
                         {"z_prime", r.zp},
                         {"u", r.u},
                         {"u_prime", r.up}});
  art.emit_json(cfg.output.stem + ".json", j);
}

inline void run_exit(const RunConfig& cfg, Artifacts& art) {
  ExitQuery qr{cfg.task.x, cfg.task.d, cfg.task.a, cfg.numeric.q};
  ResultRow row{cfg.task.functional, qr.x, qr.d, qr.a, qr.q, 0.0, cfg.task.method, 0.0};
  if (cfg.task.method == "analytic") {
    double x_max = derive_x_max(cfg);
    double coarse = analytic_exit(cfg, qr, cfg.numeric.h, x_max);
    double fine = analytic_exit(cfg, qr, cfg.numeric.h / 2.0, x_max);
    row.value = fine;
    row.error_budget = std::abs(fine - coarse); // self-estimate from step halving
  } else {
    McEstimate est = mc_exit(cfg.model, cfg.profile, qr, functional_of(cfg.task.functional),
                             cfg.numeric.n_paths, path_config(cfg));
    row.value = est.mean;
    row.error_budget = 3.0 * est.std_error + est.truncation_budget;
  }
  emit_result_rows(art, cfg, {row});
}

inline void run_resolvent(const RunConfig& cfg, Artifacts& art) {
  require(!cfg.task.points.empty(), ErrorKind::ConfigInvalid,
          "resolvent task needs 'points' (the density levels)");
  ExitQuery qr{cfg.task.x, cfg.task.d, cfg.task.a, cfg.numeric.q};
  ScaleSet s = make_scale_set(cfg.model, cfg.profile, cfg.numeric.q, cfg.task.d, cfg.numeric.h,
                              derive_x_max(cfg));
  ResolventDensity r = resolvent(qr, variant_of(cfg.task.variant), s, cfg.task.points);

  if (cfg.output.format == "csv") {
    std::string body = art.provenance();
    body += "y,density\n";
    for (std::size_t i = 0; i < r.y.size(); ++i)
      body += fmt17(r.y[i]) + "," + fmt17(r.density[i]) + "\n";
    art.emit(cfg.output.stem + ".csv", body);
    return;
  }
  nlohmann::json j;
  j["variant"] = cfg.task.variant;
  j["query"] = {{"x", qr.x}, {"d", qr.d}, {"a", qr.a}, {"q", qr.q}};
  j["mass"] = r.mass;
  j["rows"] = nlohmann::json::array();
  for (std::size_t i = 0; i < r.y.size(); ++i)
    j["rows"].push_back({{"y", r.y[i]}, {"density", r.density[i]}});
  art.emit_json(cfg.output.stem + ".json", j);
}

inline void run_ruin(const RunConfig& cfg, Artifacts& art) {
  require(cfg.numeric.q == 0.0, ErrorKind::ConfigInvalid,
          "ruin is an undiscounted quantity; set numeric.q to 0");
  std::vector<double> xs = cfg.task.points;
  if (xs.empty()) xs.push_back(cfg.task.x);

  std::vector<ResultRow> rows;
  nlohmann::json jrows = nlohmann::json::array();
  for (double x : xs) {
    ResultRow row{"ruin", x, 0.0, 0.0, 0.0, 0.0, cfg.task.method, 0.0};
    bool divergent = false;
    if (cfg.task.method == "analytic") {
      RuinResult r = ruin_probability(cfg.model, cfg.profile, x, cfg.numeric.h);
      row.value = r.value;
      divergent = r.divergent_a;
    } else {
      ExitQuery qr{x, 0.0, 0.0, 0.0};
      McEstimate est = mc_exit(cfg.model, cfg.profile, qr, ExitFunctional::OneSidedDown,
                               cfg.numeric.n_paths, path_config(cfg));
      row.value = est.mean;
      row.error_budget = 3.0 * est.std_error + est.truncation_budget;
    }
    rows.push_back(row);
    jrows.push_back(
        {{"x", x}, {"value", row.value}, {"divergent", divergent}, {"method", row.method}});
  }
  if (cfg.output.format == "csv") {
    emit_result_rows(art, cfg, rows);
    return;
  }
  nlohmann::json j;
  j["task"] = "ruin";
  j["rows"] = jrows;
  art.emit_json(cfg.output.stem + ".json", j);
}

inline void run_simulate(const RunConfig& cfg, Artifacts& art) {
  PathConfig pc = path_config(cfg);
  ExitQuery qr{cfg.task.x, cfg.task.d, cfg.task.a, cfg.numeric.q};
  McEstimate est;
  std::string quantity = cfg.task.functional;
  if (cfg.task.functional == "occupation") {
    est = mc_occupation(cfg.model, cfg.profile, qr, variant_of(cfg.task.variant),
                        cfg.task.window_lo, cfg.task.window_hi, cfg.numeric.n_paths, pc);
  } else {
    est = mc_exit(cfg.model, cfg.profile, qr, functional_of(cfg.task.functional),
                  cfg.numeric.n_paths, pc);
  }

  if (cfg.output.dump_paths > 0) {
    std::string body = art.provenance();
    body += "path,t,u\n";
    for (std::uint64_t i = 0; i < cfg.output.dump_paths; ++i) {
      PathRecord rec = simulate_path_stream(cfg.model, cfg.profile, cfg.task.x, pc, i);
      for (const auto& p : rec.points)
        body += std::to_string(i) + "," + fmt17(p.t) + "," + fmt17(p.u) + "\n";
    }
    art.emit(cfg.output.stem + "_paths.csv", body);
  }

  if (cfg.output.format == "csv") {
    ResultRow row{quantity, qr.x,      qr.d, qr.a, qr.q, est.mean, "mc",
                  3.0 * est.std_error + est.truncation_budget};
    emit_result_rows(art, cfg, {row});
    return;
  }
  nlohmann::json j;
  j["quantity"] = quantity;
  j["query"] = {{"x", qr.x}, {"d", qr.d}, {"a", qr.a}, {"q", qr.q}};
  j["estimate"] = {{"mean", est.mean},
                   {"std_error", est.std_error},
                   {"n_paths", est.n_paths},
                   {"seed", est.seed},
                   {"truncation_budget", est.truncation_budget}};
  art.emit_json(cfg.output.stem + ".json", j);
}

inline void run_converge(const RunConfig& cfg, Artifacts& art) {
  std::vector<ConvergenceRow> rows =
      convergence_report(cfg.model, cfg.profile, cfg.numeric.q, cfg.task.n_lo, cfg.task.n_hi,
                         cfg.numeric.h, derive_x_max(cfg));
  if (cfg.output.format == "csv") {
    std::string body = art.provenance();
    body += "n,sup_error,grid_h\n";
    for (const auto& r : rows)
      body += std::to_string(r.refinement) + "," + fmt17(r.sup_error) + "," + fmt17(r.grid_h) +
              "\n";
    art.emit(cfg.output.stem + ".csv", body);
    return;
  }
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows)
    j["rows"].push_back(
        {{"n", r.refinement}, {"sup_error", r.sup_error}, {"grid_h", r.grid_h}});
  art.emit_json(cfg.output.stem + ".json", j);
}

struct CompareRow {
  double x = 0.0;
  double value_a = 0.0;
  double value_b = 0.0;
  double tolerance = 0.0;
};

inline int emit_compare(Artifacts& art, const RunConfig& cfg, const std::string& method_a,
                        const std::string& method_b, const std::vector<CompareRow>& rows) {
  bool all_within = true;
  double worst_excess = 0.0, worst_gap = 0.0, worst_x = 0.0;
  for (const auto& r : rows) {
    double gap = std::abs(r.value_a - r.value_b);
    if (gap > r.tolerance) {
      all_within = false;
      if (gap - r.tolerance >= worst_excess) {
        worst_excess = gap - r.tolerance;
        worst_gap = gap;
        worst_x = r.x;
      }
    }
  }

  if (cfg.output.format == "csv") {
    std::string body = art.provenance();
    body += "x," + method_a + "," + method_b + ",discrepancy,tolerance,within\n";
    for (const auto& r : rows) {
      double gap = std::abs(r.value_a - r.value_b);
      body += fmt17(r.x) + "," + fmt17(r.value_a) + "," + fmt17(r.value_b) + "," + fmt17(gap) +
              "," + fmt17(r.tolerance) + "," + (gap <= r.tolerance ? "1" : "0") + "\n";
    }
    art.emit(cfg.output.stem + "_compare.csv", body);
  } else {
    nlohmann::json j;
    j["methods"] = {method_a, method_b};
    j["all_within"] = all_within;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rows) {
      double gap = std::abs(r.value_a - r.value_b);
      j["rows"].push_back({{"x", r.x},
                           {method_a, r.value_a},
                           {method_b, r.value_b},
                           {"discrepancy", gap},
                           {"tolerance", r.tolerance},
                           {"within", gap <= r.tolerance}});
    }
    art.emit_json(cfg.output.stem + "_compare.json", j);
  }
  if (!all_within && !art.quiet)
    std::fprintf(stderr, "compare: discrepancy %s at x=%s exceeds tolerance\n",
                 fmt17(worst_gap).c_str(), fmt17(worst_x).c_str());
  return all_within ? 0 : 1;
}

// Recursion route and integral-equation route for the same scale function,
// compared node by node on the shared grid.
inline int compare_scale_routes(const RunConfig& cfg, Artifacts& art) {
  require(cfg.profile.is_step(), ErrorKind::ConfigInvalid,
          "recursion vs volterra comparison needs a step profile");
  double x_max = derive_x_max(cfg);
  double h = cfg.numeric.h;
  bool want_z = cfg.task.functional == "z";
  GridFn rec = want_z ? build_z(cfg.model, cfg.profile, cfg.numeric.q, 0.0, h, x_max)
                      : build_w(cfg.model, cfg.profile, cfg.numeric.q, 0.0, h, x_max);
  GridFn vol = want_z ? march_z(cfg.model, cfg.profile, cfg.numeric.q, h, x_max)
                      : march_w(cfg.model, cfg.profile, cfg.numeric.q, 0.0, h, x_max);

  double norm = 0.0;
  for (double v : rec.values) norm = std::max(norm, std::abs(v));
  double tol = cfg.numeric.tolerance > 0.0 ? cfg.numeric.tolerance
                                           : std::max(1e-6, 5.0 * h * h * norm);
  std::vector<CompareRow> rows;
  rows.reserve(rec.n_nodes());
  for (std::size_t i = 0; i < rec.n_nodes(); ++i)
    rows.push_back({rec.x_at(i), rec.values[i], vol.values[i], tol});
  return emit_compare(art, cfg, "recursion", "volterra", rows);
}

// Analytic exit value against its Monte Carlo estimate: one row, tolerance
// three standard errors plus the analytic self-estimate.
inline int compare_exit_routes(const RunConfig& cfg, Artifacts& art) {
  ExitQuery qr{cfg.task.x, cfg.task.d, cfg.task.a, cfg.numeric.q};
  double x_max = derive_x_max(cfg);
  double coarse = analytic_exit(cfg, qr, cfg.numeric.h, x_max);
  double fine = analytic_exit(cfg, qr, cfg.numeric.h / 2.0, x_max);
  McEstimate est = mc_exit(cfg.model, cfg.profile, qr, functional_of(cfg.task.functional),
                           cfg.numeric.n_paths, path_config(cfg));
  double tol = 3.0 * est.std_error + est.truncation_budget + std::abs(fine - coarse) +
               cfg.numeric.tolerance;
  return emit_compare(art, cfg, "analytic", "mc", {{qr.x, fine, est.mean, tol}});
}

inline RunConfig load_with_overrides(const CliOptions& opt) {
  require(!opt.config_path.empty(), ErrorKind::ConfigInvalid, "no config file given");
  RunConfig cfg = load_config(opt.config_path);
  if (opt.has_seed_override) cfg.numeric.seed = opt.seed_override;
  if (!opt.format.empty()) {
    require(opt.format == "csv" || opt.format == "json", ErrorKind::ConfigInvalid,
            "--format must be csv or json");
    cfg.output.format = opt.format;
  }
  return cfg;
}

inline Artifacts make_artifacts(const CliOptions& opt, const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(opt.out_dir, ec);
  require(!ec, ErrorKind::IoError, "cannot create output directory " + opt.out_dir);
  return Artifacts{opt.out_dir, config_hash(cfg), opt.quiet, {}};
}

// Shared failure path: report the structured error name both on stderr and as
// a machine-readable artifact, then map the kind to the exit code.
template <typename Body>
inline int guarded(const CliOptions& opt, Body&& body) {
  try {
    return body();
  } catch (const Error& e) {
    int code = exit_code_for(e.kind());
    std::fprintf(stderr, "error: %s\n", e.what());
    nlohmann::json j;
    j["error"] = e.name();
    j["message"] = e.what();
    j["exit_code"] = code;
    j["library"] = kLibraryVersion;
    std::error_code ec;
    std::filesystem::create_directories(opt.out_dir, ec);
    if (!ec) {
      std::ofstream out(opt.out_dir + "/error.json", std::ios::binary);
      if (out.good()) out << j.dump(2) << "\n";
    }
    return code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}

} // namespace cli_detail

inline int run_command(const CliOptions& opt) {
  return cli_detail::guarded(opt, [&]() {
    RunConfig cfg = cli_detail::load_with_overrides(opt);
    cli_detail::Artifacts art = cli_detail::make_artifacts(opt, cfg);
    switch (cfg.task.kind) {
      case TaskKind::Scale: cli_detail::run_scale(cfg, art); break;
      case TaskKind::Exit: cli_detail::run_exit(cfg, art); break;
      case TaskKind::Resolvent: cli_detail::run_resolvent(cfg, art); break;
      case TaskKind::Ruin: cli_detail::run_ruin(cfg, art); break;
      case TaskKind::Simulate: cli_detail::run_simulate(cfg, art); break;
      case TaskKind::Converge: cli_detail::run_converge(cfg, art); break;
    }
    return 0;
  });
}

inline int compare_command(const CliOptions& opt) {
  return cli_detail::guarded(opt, [&]() {
    RunConfig cfg = cli_detail::load_with_overrides(opt);
    require(cfg.task.methods.size() == 2, ErrorKind::ConfigInvalid,
            "compare needs task.methods to name exactly two routes");
    cli_detail::Artifacts art = cli_detail::make_artifacts(opt, cfg);
    const auto& ms = cfg.task.methods;
    bool scale_pair = (ms[0] == "recursion" && ms[1] == "volterra") ||
                      (ms[0] == "volterra" && ms[1] == "recursion");
    bool exit_pair =
        (ms[0] == "analytic" && ms[1] == "mc") || (ms[0] == "mc" && ms[1] == "analytic");
    if (scale_pair) return cli_detail::compare_scale_routes(cfg, art);
    if (exit_pair) return cli_detail::compare_exit_routes(cfg, art);
    fail(ErrorKind::ConfigInvalid,
         "supported comparisons: recursion vs volterra, analytic vs mc");
  });
}

} // namespace levyref
