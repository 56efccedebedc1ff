#include <iostream>

#include "CLI11.hpp"
#include "setproj/apps.hpp"
#include "setproj/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Projections onto intersections of constraint sets"};
  app.require_subcommand(1);
  std::string config;
  std::size_t threads = 0;
  std::string mode;
  std::string out;

  for (const char* name : {"project", "restore", "desaturate", "bench", "spg"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--threads", threads, "worker threads (overrides solver.threads)")->check(CLI::PositiveNumber);
    sub->add_option("--mode", mode, "parsdmm, ml-parsdmm, dykstra or consensus");
    sub->add_option("--out", out, "output directory");
  }
  CLI11_PARSE(app, argc, argv);

  setproj::RunConfig cfg;
  try {
    cfg = setproj::load_config(config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  if (!cfg.command.empty() && cfg.command != command) {
    std::cerr << "error: config is for '" << cfg.command << "', not '" << command << "'\n";
    return 1;
  }
  cfg.command = command;
  if (threads > 0) {
    cfg.solver.threads = threads;
    cfg.solver.parallel_sets = threads > 1;
  }
  if (!mode.empty()) cfg.mode = mode;
  if (!out.empty()) cfg.out_dir = out;
  return setproj::run_command(cfg);
}
