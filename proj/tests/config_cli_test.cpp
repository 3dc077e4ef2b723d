// Config parsing, canonical form and hashing, plus the command-line surface.
// The Cli suite drives the real binary as a subprocess and inspects the
// artifacts it writes, so it doubles as an end-to-end check of the run and
// compare commands against the shipped sample configurations.

#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <levyref/config.hpp>

namespace fs = std::filesystem;
using levyref::Error;
using levyref::ErrorKind;
using levyref::RunConfig;

namespace {

RunConfig parse(const std::string& text) {
  return levyref::parse_config(nlohmann::json::parse(text));
}

void expect_rejected(const std::string& text, ErrorKind kind = ErrorKind::ConfigInvalid) {
  try {
    parse(text);
    ADD_FAILURE() << "config was accepted: " << text;
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

const char* kMinimal = R"({
  "model": {"drift": 1.5, "jumps": {"kind": "exponential", "intensity": 1.0, "rate": 1.0}},
  "task": {"kind": "ruin"}
})";

const char* kFull = R"({
  "model": {"name": "jd-a", "drift": 1.5, "sigma": 0.5,
            "jumps": {"kind": "hyperexponential", "intensity": 2.0,
                      "weights": [0.25, 0.75], "rates": [1.0, 3.0]}},
  "profile": {"kind": "step", "barriers": [1.0, 2.0], "deltas": [0.1, 0.2]},
  "task": {"kind": "exit", "functional": "two_sided_up", "variant": "two_barrier",
           "method": "mc", "methods": ["analytic", "mc"], "x": 1.5, "d": 0.25, "a": 3.0,
           "window_lo": 1.0, "window_hi": 2.0, "points": [0.5, 1.5], "n_lo": 3, "n_hi": 5},
  "numeric": {"q": 0.25, "h": 0.015625, "x_max": 6.0, "tolerance": 1e-06, "seed": 7,
              "n_paths": 500, "max_step": 0.01, "horizon": 12.0, "scheme": "euler"},
  "output": {"stem": "probe", "format": "json", "dump_paths": 2}
})";

} // namespace

TEST(Config, ParsesEveryBlock) {
  RunConfig cfg = parse(kFull);

  EXPECT_EQ(cfg.model.name, "jd-a");
  EXPECT_DOUBLE_EQ(cfg.model.drift, 1.5);
  EXPECT_DOUBLE_EQ(cfg.model.sigma, 0.5);
  ASSERT_EQ(cfg.model.jumps.phases(), 2u);
  EXPECT_DOUBLE_EQ(cfg.model.jumps.intensity, 2.0);
  EXPECT_DOUBLE_EQ(cfg.model.jumps.weights[1], 0.75);
  EXPECT_DOUBLE_EQ(cfg.model.jumps.rates[1], 3.0);

  ASSERT_TRUE(cfg.profile.is_step());
  EXPECT_EQ(cfg.profile.barriers(), (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(cfg.profile.deltas(), (std::vector<double>{0.1, 0.2}));

  EXPECT_EQ(cfg.task.kind, levyref::TaskKind::Exit);
  EXPECT_EQ(cfg.task.functional, "two_sided_up");
  EXPECT_EQ(cfg.task.variant, "two_barrier");
  EXPECT_EQ(cfg.task.method, "mc");
  EXPECT_EQ(cfg.task.methods, (std::vector<std::string>{"analytic", "mc"}));
  EXPECT_DOUBLE_EQ(cfg.task.x, 1.5);
  EXPECT_DOUBLE_EQ(cfg.task.d, 0.25);
  EXPECT_DOUBLE_EQ(cfg.task.a, 3.0);
  EXPECT_DOUBLE_EQ(cfg.task.window_lo, 1.0);
  EXPECT_DOUBLE_EQ(cfg.task.window_hi, 2.0);
  EXPECT_EQ(cfg.task.points, (std::vector<double>{0.5, 1.5}));
  EXPECT_EQ(cfg.task.n_lo, 3);
  EXPECT_EQ(cfg.task.n_hi, 5);

  EXPECT_DOUBLE_EQ(cfg.numeric.q, 0.25);
  EXPECT_DOUBLE_EQ(cfg.numeric.h, 0.015625);
  EXPECT_DOUBLE_EQ(cfg.numeric.x_max, 6.0);
  EXPECT_DOUBLE_EQ(cfg.numeric.tolerance, 1e-6);
  EXPECT_EQ(cfg.numeric.seed, 7u);
  EXPECT_EQ(cfg.numeric.n_paths, 500u);
  EXPECT_DOUBLE_EQ(cfg.numeric.max_step, 0.01);
  EXPECT_DOUBLE_EQ(cfg.numeric.horizon, 12.0);
  EXPECT_EQ(levyref::scheme_of(cfg.numeric), levyref::Scheme::EulerJumpDiffusion);

  EXPECT_EQ(cfg.output.stem, "probe");
  EXPECT_EQ(cfg.output.format, "json");
  EXPECT_EQ(cfg.output.dump_paths, 2u);
}

TEST(Config, AppliesDefaults) {
  RunConfig cfg = parse(kMinimal);

  EXPECT_TRUE(cfg.profile.is_zero());
  EXPECT_EQ(cfg.task.kind, levyref::TaskKind::Ruin);
  EXPECT_EQ(cfg.task.method, "analytic");
  EXPECT_TRUE(cfg.task.methods.empty());
  EXPECT_TRUE(cfg.task.points.empty());
  EXPECT_EQ(cfg.task.n_lo, 2);
  EXPECT_EQ(cfg.task.n_hi, 6);

  EXPECT_DOUBLE_EQ(cfg.numeric.q, 0.0);
  EXPECT_DOUBLE_EQ(cfg.numeric.h, 1.0 / 512.0);
  EXPECT_DOUBLE_EQ(cfg.numeric.x_max, 0.0);
  EXPECT_DOUBLE_EQ(cfg.numeric.tolerance, 0.0);
  EXPECT_EQ(cfg.numeric.seed, 0u);
  EXPECT_EQ(cfg.numeric.n_paths, 10000u);
  EXPECT_DOUBLE_EQ(cfg.numeric.max_step, 1e-3);
  EXPECT_DOUBLE_EQ(cfg.numeric.horizon, 0.0);
  EXPECT_EQ(levyref::scheme_of(cfg.numeric), levyref::Scheme::EventDriven);

  // The stem defaults to the task name so artifacts are self-describing.
  EXPECT_EQ(cfg.output.stem, "ruin");
  EXPECT_EQ(cfg.output.format, "csv");
  EXPECT_EQ(cfg.output.dump_paths, 0u);
}

TEST(Config, MapsFunctionalAndVariantNames) {
  EXPECT_EQ(levyref::functional_of("two_sided_up"), levyref::ExitFunctional::TwoSidedUp);
  EXPECT_EQ(levyref::functional_of("two_sided_down"), levyref::ExitFunctional::TwoSidedDown);
  EXPECT_EQ(levyref::functional_of("one_sided_up"), levyref::ExitFunctional::OneSidedUp);
  EXPECT_EQ(levyref::functional_of("one_sided_down"), levyref::ExitFunctional::OneSidedDown);
  EXPECT_THROW(levyref::functional_of("sideways"), Error);

  EXPECT_EQ(levyref::variant_of("two_barrier"), levyref::ResolventVariant::TwoBarrier);
  EXPECT_EQ(levyref::variant_of("lower_only"), levyref::ResolventVariant::LowerOnly);
  EXPECT_EQ(levyref::variant_of("upper_only"), levyref::ResolventVariant::UpperOnly);
  EXPECT_EQ(levyref::variant_of("free"), levyref::ResolventVariant::Free);
  EXPECT_THROW(levyref::variant_of("open"), Error);
}

TEST(Config, RejectsUnknownKeys) {
  expect_rejected(R"({"model": {"drift": 1.0, "jumps": {"kind": "none"}},
                      "task": {"kind": "ruin"}, "extra": 1})");
  expect_rejected(R"({"model": {"drift": 1.0, "mu": 2.0, "jumps": {"kind": "none"}},
                      "task": {"kind": "ruin"}})");
  expect_rejected(R"({"model": {"drift": 1.0, "jumps": {"kind": "none"}},
                      "profile": {"kind": "zero", "levels": []},
                      "task": {"kind": "ruin"}})");
  expect_rejected(R"({"model": {"drift": 1.0, "jumps": {"kind": "none"}},
                      "task": {"kind": "ruin", "start": 0.0}})");
  expect_rejected(R"({"model": {"drift": 1.0, "jumps": {"kind": "none"}},
                      "task": {"kind": "ruin"}, "numeric": {"step": 0.1}})");
  expect_rejected(R"({"model": {"drift": 1.0, "jumps": {"kind": "none"}},
                      "task": {"kind": "ruin"}, "output": {"file": "x.csv"}})");
}

TEST(Config, RejectsInvalidValues) {
  auto with = [](const std::string& numeric_or_more) {
    return std::string(R"({"model": {"drift": 1.5,
                           "jumps": {"kind": "exponential", "intensity": 1.0, "rate": 1.0}},)") +
           numeric_or_more + "}";
  };

  expect_rejected(R"({"task": {"kind": "ruin"}})");              // missing model
  expect_rejected(with(R"("task": {"kind": "scales"})"));        // unknown task kind
  expect_rejected(with(R"("task": {"kind": "ruin", "method": "exact"})"));
  expect_rejected(with(R"("task": {"kind": "ruin", "methods": ["analytic"]})"));
  expect_rejected(with(R"("task": {"kind": "ruin"}, "numeric": {"q": -0.1})"));
  expect_rejected(with(R"("task": {"kind": "ruin"}, "numeric": {"h": 0.0})"));
  expect_rejected(with(R"("task": {"kind": "ruin"}, "numeric": {"n_paths": 0})"));
  expect_rejected(with(R"("task": {"kind": "ruin"}, "numeric": {"max_step": 0.0})"));
  expect_rejected(with(R"("task": {"kind": "ruin"}, "numeric": {"horizon": -1.0})"));
  expect_rejected(with(R"("task": {"kind": "ruin"}, "numeric": {"seed": -3})"));
  expect_rejected(with(R"("task": {"kind": "ruin"}, "numeric": {"scheme": "milstein"})"));
  expect_rejected(with(R"("task": {"kind": "ruin"}, "output": {"format": "yaml"})"));
  expect_rejected(with(R"("task": {"kind": "ruin"}, "output": {"stem": "a/b"})"));
  expect_rejected(with(R"("task": {"kind": "ruin"}, "profile": {"kind": "ramp"})"));

  // Unknown jump family.
  expect_rejected(R"({"model": {"drift": 1.5, "jumps": {"kind": "gamma", "intensity": 1.0}},
                      "task": {"kind": "ruin"}})");

  // Structural jump errors surface from the model's own validation.
  expect_rejected(R"({"model": {"drift": 1.5,
                                "jumps": {"kind": "hyperexponential", "intensity": 1.0,
                                          "weights": [0.5], "rates": [1.0, 2.0]}},
                      "task": {"kind": "ruin"}})",
                  ErrorKind::DomainError);

  // Deltas are increments, so they must be positive for the rate to grow.
  expect_rejected(with(R"("task": {"kind": "ruin"},
                          "profile": {"kind": "step", "barriers": [1.0, 2.0],
                                      "deltas": [0.1, -0.2]})"),
                  ErrorKind::NonMonotoneProfile);

  // Admissibility runs at parse time: a drain at or above the drift is
  // rejected before any task can be attempted.
  expect_rejected(with(R"("task": {"kind": "ruin"},
                          "profile": {"kind": "step", "barriers": [1.0], "deltas": [1.5]})"));
}

TEST(Config, RoundTripIsStable) {
  for (const char* text : {kMinimal, kFull}) {
    RunConfig cfg = parse(text);
    std::string dump = levyref::canonical_dump(cfg);
    RunConfig again = parse(dump);
    EXPECT_EQ(levyref::canonical_dump(again), dump);
    EXPECT_EQ(levyref::config_hash(again), levyref::config_hash(cfg));
  }

  // The canonical form materializes every default.
  nlohmann::json j = levyref::to_json(parse(kMinimal));
  EXPECT_DOUBLE_EQ(j["numeric"]["h"].get<double>(), 1.0 / 512.0);
  EXPECT_EQ(j["numeric"]["n_paths"].get<std::uint64_t>(), 10000u);
  EXPECT_EQ(j["output"]["format"], "csv");
  EXPECT_EQ(j["profile"]["kind"], "zero");
  EXPECT_EQ(j["task"]["method"], "analytic");
}

TEST(Config, HashTracksContentNotSpelling) {
  // Same content with blocks and keys in a different order.
  std::string reordered = R"({
    "task": {"kind": "ruin"},
    "model": {"jumps": {"rate": 1.0, "kind": "exponential", "intensity": 1.0}, "drift": 1.5}
  })";
  EXPECT_EQ(levyref::config_hash(parse(reordered)), levyref::config_hash(parse(kMinimal)));

  std::string reseeded = R"({
    "model": {"drift": 1.5, "jumps": {"kind": "exponential", "intensity": 1.0, "rate": 1.0}},
    "task": {"kind": "ruin"},
    "numeric": {"seed": 1}
  })";
  EXPECT_NE(levyref::config_hash(parse(reseeded)), levyref::config_hash(parse(kMinimal)));

  RunConfig full = parse(kFull);
  RunConfig minimal = parse(kMinimal);
  EXPECT_NE(levyref::model_hash(full.model), levyref::model_hash(minimal.model));
  EXPECT_NE(levyref::profile_hash(full.profile), levyref::profile_hash(minimal.profile));
  EXPECT_EQ(levyref::profile_hash(minimal.profile),
            levyref::profile_hash(levyref::RateProfile::zero()));
}

// ---------------------------------------------------------------------------
// Command-line surface, exercised through the built binary.

namespace {

int run_cli(const std::string& args) {
  std::string cmd = std::string(LEVYREF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path fresh_dir(const std::string& tag) {
  fs::path dir =
      fs::temp_directory_path() / ("levyref_test_" + std::to_string(::getpid()) + "_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_text(p)); }

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

std::vector<std::string> fields_of(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::string sample(const char* name) { return std::string(LEVYREF_CONFIG_DIR) + "/" + name; }

} // namespace

TEST(Cli, ShippedSamplesAllValidate) {
  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(LEVYREF_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    ++count;
    EXPECT_NO_THROW(levyref::load_config(entry.path().string()))
        << entry.path().filename().string();
  }
  EXPECT_GE(count, 7u);
}

TEST(Cli, ScaleTaskEmitsTheBaseValue) {
  fs::path dir = fresh_dir("scale");
  ASSERT_EQ(run_cli("run --config " + sample("scale_cl_a.json") + " --out " + dir.string() +
                    " --quiet"),
            0);

  std::vector<std::string> lines = lines_of(read_text(dir / "scale_cl_a.csv"));
  ASSERT_GE(lines.size(), 4u);
  EXPECT_EQ(lines[0].rfind("# levyref 0.1.0 config=", 0), 0u);
  EXPECT_EQ(lines[1].rfind("# model=", 0), 0u);
  EXPECT_EQ(lines[2], "x,w,w_prime,z,z_prime,u,u_prime");

  // At the origin the first scale function equals the reciprocal drift.
  std::vector<std::string> row = fields_of(lines[3]);
  ASSERT_EQ(row.size(), 7u);
  EXPECT_EQ(row[0], "0");
  EXPECT_NEAR(std::stod(row[1]), 2.0 / 3.0, 1e-10);
  EXPECT_NEAR(std::stod(row[3]), 1.0, 1e-12);
  EXPECT_NEAR(std::stod(row[5]), 1.0, 1e-12);
}

TEST(Cli, RuinTaskEmitsJsonValues) {
  fs::path dir = fresh_dir("ruin");
  ASSERT_EQ(run_cli("run --config " + sample("ruin_classical.json") + " --out " + dir.string() +
                    " --quiet"),
            0);

  nlohmann::json j = read_json(dir / "ruin_classical.json");
  EXPECT_EQ(j["library"], "levyref 0.1.0");
  ASSERT_EQ(j["rows"].size(), 4u);
  // Without refraction the classical model has a closed-form ruin curve.
  auto psi = [](double x) { return (2.0 / 3.0) * std::exp(-x / 3.0); };
  const double xs[] = {0.0, 1.0, 2.0, 5.0};
  for (int i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(j["rows"][i]["x"].get<double>(), xs[i]);
    EXPECT_NEAR(j["rows"][i]["value"].get<double>(), psi(xs[i]), 1e-8);
    EXPECT_FALSE(j["rows"][i]["divergent"].get<bool>());
  }
}

TEST(Cli, MalformedProfileFailsValidation) {
  fs::path dir = fresh_dir("badprofile");
  write_text(dir / "bad.json", R"({
    "model": {"drift": 1.5, "jumps": {"kind": "exponential", "intensity": 1.0, "rate": 1.0}},
    "profile": {"kind": "step", "barriers": [1.0], "deltas": [-0.1]},
    "task": {"kind": "ruin"}
  })");
  EXPECT_EQ(run_cli("run --config " + (dir / "bad.json").string() + " --out " + dir.string() +
                    " --quiet"),
            2);
  nlohmann::json err = read_json(dir / "error.json");
  EXPECT_EQ(err["error"], "NonMonotoneProfile");
  EXPECT_EQ(err["exit_code"], 2);
}

TEST(Cli, UnknownKeysFailValidation) {
  fs::path dir = fresh_dir("badkey");
  write_text(dir / "bad.json", R"({
    "model": {"drift": 1.5, "jumps": {"kind": "exponential", "intensity": 1.0, "rate": 1.0}},
    "task": {"kind": "ruin"},
    "numeric": {"step": 0.1}
  })");
  EXPECT_EQ(run_cli("run --config " + (dir / "bad.json").string() + " --out " + dir.string() +
                    " --quiet"),
            2);
  EXPECT_EQ(read_json(dir / "error.json")["error"], "ConfigInvalid");
}

TEST(Cli, MissingOrMalformedConfigFailsCleanly) {
  fs::path dir = fresh_dir("badfile");
  EXPECT_EQ(run_cli("run --config " + (dir / "absent.json").string() + " --out " + dir.string() +
                    " --quiet"),
            2);
  EXPECT_EQ(read_json(dir / "error.json")["error"], "IoError");

  write_text(dir / "mangled.json", "{ this is not json");
  EXPECT_EQ(run_cli("run --config " + (dir / "mangled.json").string() + " --out " + dir.string() +
                    " --quiet"),
            2);
  EXPECT_EQ(read_json(dir / "error.json")["error"], "ConfigInvalid");
}

TEST(Cli, ScaleRoutesAgreeOnAFineGrid) {
  fs::path dir = fresh_dir("cmpfine");
  write_text(dir / "cmp.json", R"({
    "model": {"drift": 1.5, "jumps": {"kind": "exponential", "intensity": 1.0, "rate": 1.0}},
    "profile": {"kind": "step", "barriers": [1.0], "deltas": [0.1]},
    "task": {"kind": "scale", "methods": ["recursion", "volterra"]},
    "numeric": {"q": 0.25, "h": 0.0078125, "x_max": 2.0},
    "output": {"stem": "routes"}
  })");
  ASSERT_EQ(run_cli("compare --config " + (dir / "cmp.json").string() + " --out " + dir.string() +
                    " --quiet"),
            0);

  std::vector<std::string> lines = lines_of(read_text(dir / "routes_compare.csv"));
  ASSERT_GE(lines.size(), 3u);
  EXPECT_EQ(lines[1], "x,recursion,volterra,discrepancy,tolerance,within");
  for (std::size_t i = 2; i < lines.size(); ++i) {
    std::vector<std::string> row = fields_of(lines[i]);
    ASSERT_EQ(row.size(), 6u);
    EXPECT_EQ(row[5], "1") << lines[i];
  }
}

TEST(Cli, CoarseGridComparisonFlagsDiscrepancies) {
  fs::path dir = fresh_dir("cmpcoarse");
  write_text(dir / "cmp.json", R"({
    "model": {"drift": 1.5, "jumps": {"kind": "exponential", "intensity": 1.0, "rate": 1.0}},
    "profile": {"kind": "step", "barriers": [1.0], "deltas": [0.1]},
    "task": {"kind": "scale", "methods": ["recursion", "volterra"]},
    "numeric": {"q": 0.25, "h": 0.25, "x_max": 2.0, "tolerance": 1e-09},
    "output": {"stem": "routes"}
  })");
  ASSERT_EQ(run_cli("compare --config " + (dir / "cmp.json").string() + " --out " + dir.string() +
                    " --quiet"),
            1);

  std::string text = read_text(dir / "routes_compare.csv");
  EXPECT_NE(text.find(",0\n"), std::string::npos) << "expected a failing row";
}

TEST(Cli, BrownianExitMatchesMonteCarlo) {
  fs::path dir = fresh_dir("bm");
  ASSERT_EQ(run_cli("compare --config " + sample("exit_brownian_mc.json") + " --out " +
                    dir.string() + " --quiet"),
            0);

  std::vector<std::string> lines = lines_of(read_text(dir / "exit_brownian_compare.csv"));
  ASSERT_EQ(lines.size(), 3u);
  std::vector<std::string> row = fields_of(lines[2]);
  ASSERT_EQ(row.size(), 6u);
  // The driftful Brownian two-sided passage value is known in closed form.
  double analytic = std::stod(row[1]);
  EXPECT_NEAR(analytic, (1.0 - std::exp(-2.0)) / (1.0 - std::exp(-4.0)), 1e-12);
  EXPECT_LT(std::stod(row[3]), std::stod(row[4]));
}

TEST(Cli, RefractedExitComparesBothRoutes) {
  fs::path dir = fresh_dir("tscmp");
  ASSERT_EQ(run_cli("compare --config " + sample("exit_two_sided.json") + " --out " +
                    dir.string() + " --quiet"),
            0);
  ASSERT_EQ(run_cli("run --config " + sample("exit_two_sided.json") + " --out " + dir.string() +
                    " --quiet"),
            0);

  std::vector<std::string> lines = lines_of(read_text(dir / "exit_two_sided.csv"));
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[1], "quantity,x,d,a,q,value,method,error_budget");
  std::vector<std::string> row = fields_of(lines[2]);
  ASSERT_EQ(row.size(), 8u);
  EXPECT_EQ(row[0], "two_sided_up");
  EXPECT_EQ(row[6], "analytic");
  EXPECT_GT(std::stod(row[5]), 0.0);
  EXPECT_LT(std::stod(row[5]), 1.0);
}

TEST(Cli, EstimatesAreReproducibleAndSeedOverridable) {
  fs::path dir = fresh_dir("repro");
  write_text(dir / "sim.json", R"({
    "model": {"drift": 1.5, "jumps": {"kind": "exponential", "intensity": 1.0, "rate": 1.0}},
    "profile": {"kind": "step", "barriers": [1.0], "deltas": [0.1]},
    "task": {"kind": "simulate", "functional": "two_sided_up", "x": 1.5, "d": 0.0, "a": 3.0},
    "numeric": {"q": 0.25, "n_paths": 2000, "seed": 9},
    "output": {"stem": "sim", "format": "json"}
  })");
  std::string cfg = (dir / "sim.json").string();
  fs::path a = dir / "a", b = dir / "b", c = dir / "c";
  ASSERT_EQ(run_cli("run --config " + cfg + " --out " + a.string() + " --quiet"), 0);
  ASSERT_EQ(run_cli("run --config " + cfg + " --out " + b.string() + " --quiet"), 0);
  ASSERT_EQ(run_cli("run --config " + cfg + " --out " + c.string() +
                    " --seed-override 10 --quiet"),
            0);

  // Same config, same bytes; a new seed moves the estimate and the hash.
  EXPECT_EQ(read_text(a / "sim.json"), read_text(b / "sim.json"));
  nlohmann::json ja = read_json(a / "sim.json");
  nlohmann::json jc = read_json(c / "sim.json");
  EXPECT_EQ(ja["estimate"]["seed"], 9);
  EXPECT_EQ(jc["estimate"]["seed"], 10);
  EXPECT_NE(ja["estimate"]["mean"], jc["estimate"]["mean"]);
  EXPECT_NE(ja["config_hash"], jc["config_hash"]);
}

TEST(Cli, PathDumpsFollowTheRequestedCount) {
  fs::path dir = fresh_dir("dump");
  ASSERT_EQ(run_cli("run --config " + sample("simulate_occupation.json") + " --out " +
                    dir.string() + " --quiet"),
            0);

  nlohmann::json j = read_json(dir / "simulate_occupation.json");
  EXPECT_EQ(j["quantity"], "occupation");
  EXPECT_EQ(j["estimate"]["n_paths"], 20000);

  std::vector<std::string> lines = lines_of(read_text(dir / "simulate_occupation_paths.csv"));
  ASSERT_GE(lines.size(), 3u);
  EXPECT_EQ(lines[1], "path,t,u");
  std::set<std::string> ids;
  for (std::size_t i = 2; i < lines.size(); ++i) ids.insert(fields_of(lines[i])[0]);
  EXPECT_EQ(ids, (std::set<std::string>{"0", "1", "2"}));
}

TEST(Cli, FormatOverrideSwitchesTheArtifact) {
  fs::path dir = fresh_dir("fmt");
  ASSERT_EQ(run_cli("run --config " + sample("ruin_classical.json") + " --out " + dir.string() +
                    " --format csv --quiet"),
            0);
  EXPECT_FALSE(fs::exists(dir / "ruin_classical.json"));
  std::vector<std::string> lines = lines_of(read_text(dir / "ruin_classical.csv"));
  ASSERT_GE(lines.size(), 3u);
  EXPECT_EQ(lines[1], "quantity,x,d,a,q,value,method,error_budget");
}

TEST(Cli, BadInvocationsExitTwo) {
  EXPECT_EQ(run_cli(""), 2);                   // a subcommand is required
  EXPECT_EQ(run_cli("run"), 2);                // --config is required
  EXPECT_EQ(run_cli("transmogrify"), 2);       // unknown subcommand
  EXPECT_EQ(run_cli("--help"), 0);

  // compare needs task.methods; a plain run config is rejected.
  fs::path dir = fresh_dir("badcmp");
  EXPECT_EQ(run_cli("compare --config " + sample("scale_cl_a.json") + " --out " + dir.string() +
                    " --quiet"),
            2);
  EXPECT_EQ(read_json(dir / "error.json")["error"], "ConfigInvalid");
}
