#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>

#include "oldroyd/twolevel.hpp"
#include "oldroyd/verify.hpp"

namespace oldroyd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitCheck = 4;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat key=value configuration with [section] headers; keys are exposed as
/// "section.key". Comments start with '#' or ';'.
std::map<std::string, std::string> parse_config_file(const std::string& path);

struct RunConfig {
  OldroydParams params;
  ElementKind element = ElementKind::MINI;
  std::vector<int> levels;
  TimeScheme scheme;
  double T = -1.0;
  KernelRule kernel_rule = KernelRule::RIGHT_RECT;
  SolverConfig solver;
  std::string mms_id = "default";    ///< empty: no manufactured solution
  std::string initial = "mms";       ///< mms | zero | rough
  double rough_amplitude = 0.25;
  unsigned seed = 1;
  std::vector<int> coarse_levels;
  int fine_n = 0;
  bool fine_initial_prolong = false;
  std::string spill_path;
  std::string study = "all";         ///< galerkin | twolevel | coupled | all
  std::vector<std::pair<int, int>> coupled_pairs;  ///< (coarse n, fine n)
  std::string run_method = "galerkin";             ///< galerkin | two_level
  std::string out_dir = "out";
  bool vtk = false;
  int vtk_every = 0;
  int jobs = 0;  ///< 0 = hardware concurrency
  bool check = false;
};

/// Builds and validates a RunConfig; throws ConfigError naming the offending key.
RunConfig load_run_config(const std::map<std::string, std::string>& kv);
RunConfig load_run_config_file(const std::string& path);

/// A mesh/space/operators bundle with stable addresses.
struct Discretization {
  std::unique_ptr<Mesh> mesh;
  std::unique_ptr<FESpace> space;
  AssembledOperators ops;
  static Discretization create(int n, ElementKind kind);
};

/// Random P1 interior velocity coefficients in [-amplitude, amplitude]
/// (an H^1 field with no extra smoothness), for rough-data studies.
Vector rough_initial_coefficients(const FESpace& space, unsigned seed, double amplitude);

/// The same rough data as an evaluable field on its defining mesh, so that
/// differently refined levels can each project it.
Forcing rough_initial_field(const Mesh& mesh_template, unsigned seed, double amplitude);

struct ConvergenceRow {
  std::string mode;
  double h = 0.0, H = 0.0;
  ErrorNorms err;
  double gap_h1 = 0.0, gap_p = 0.0;
  double wall_ms = 0.0;
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  struct Fit {
    double l2u = 0, h1u = 0, l2p = 0, gap_h1 = 0, gap_p = 0;
    bool valid = false;  ///< fitted slopes reported only with >= 3 levels
  };
  Fit galerkin, twolevel;
  double coupled_h1_order = 0.0;  ///< successive order over the coupled pairs
  bool coupled_valid = false;
  bool solver_failed = false;
};

ConvergenceReport run_convergence_study(const RunConfig& cfg);

struct CompareResult {
  double H = 0, h = 0;
  double galerkin_ms = 0, twolevel_ms = 0, coarse_ms = 0, transfer_ms = 0, fine_ms = 0;
  double ratio = 0;  ///< twolevel_ms / galerkin_ms
  int picard_galerkin = 0, picard_coarse = 0;
  ErrorNorms gap;
  ErrorNorms err_galerkin, err_twolevel;  ///< vs the manufactured solution, when configured
  bool has_exact = false;
  bool solver_failed = false;
};

CompareResult run_compare(const RunConfig& cfg);

/// Subcommands; return process exit codes (0/2/3/4).
int cmd_run(const RunConfig& cfg);
int cmd_convergence(const RunConfig& cfg);
int cmd_compare(const RunConfig& cfg);

}  // namespace oldroyd
