#include <CLI11.hpp>

#include "levyref/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Scale functions, exit identities, resolvent densities, and Monte Carlo "
               "validation for spectrally negative processes with level-dependent drift."};
  app.require_subcommand(1);

  levyref::CliOptions opt;
  CLI::App* run = app.add_subcommand("run", "execute the task described by a JSON config");
  CLI::App* cmp = app.add_subcommand("compare", "cross-validate two routes to one quantity");
  CLI::Option* seed_opts[2];
  CLI::App* cmds[2] = {run, cmp};
  for (int i = 0; i < 2; ++i) {
    cmds[i]->add_option("--config", opt.config_path, "path to the JSON run configuration")
        ->required();
    cmds[i]->add_option("--out", opt.out_dir, "output directory")->capture_default_str();
    cmds[i]->add_option("--format", opt.format, "override the output format (csv or json)");
    seed_opts[i] =
        cmds[i]->add_option("--seed-override", opt.seed_override, "replace the config seed");
    cmds[i]->add_flag("--quiet", opt.quiet, "suppress progress lines");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2; // --help exits cleanly; bad flags are validation failures
  }
  opt.has_seed_override = seed_opts[0]->count() + seed_opts[1]->count() > 0;

  return run->parsed() ? levyref::run_command(opt) : levyref::compare_command(opt);
}
