#include <CLI11.hpp>
#include <iostream>

#include "oldroyd/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Mixed finite element solver for the order-one viscoelastic flow model: "
               "standard Galerkin and two-level (coarse nonlinear + fine linearized) methods"};
  std::string config_path, mode = "run", out_dir;
  bool check = false, vtk = false;
  int jobs = -1;
  app.add_option("--config", config_path, "configuration file (key = value with [sections])")
      ->required();
  app.add_option("--mode", mode, "run | convergence | compare")
      ->check(CLI::IsMember({"run", "convergence", "compare"}));
  app.add_flag("--check", check, "validate results against the built-in acceptance thresholds");
  app.add_option("--jobs", jobs, "max concurrent sweep members");
  app.add_option("--out", out_dir, "output directory (overrides output.dir)");
  app.add_flag("--vtk", vtk, "emit VTK field dumps (overrides output.vtk)");
  CLI11_PARSE(app, argc, argv);

  try {
    oldroyd::RunConfig cfg = oldroyd::load_run_config_file(config_path);
    cfg.check = check;
    if (jobs >= 0) cfg.jobs = jobs;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (vtk) cfg.vtk = true;
    if (mode == "run") return oldroyd::cmd_run(cfg);
    if (mode == "convergence") return oldroyd::cmd_convergence(cfg);
    return oldroyd::cmd_compare(cfg);
  } catch (const oldroyd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return oldroyd::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return oldroyd::kExitSolver;
  }
}
