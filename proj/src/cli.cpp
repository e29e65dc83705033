#include "oldroyd/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include "oldroyd/io.hpp"

namespace oldroyd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv[section.empty() ? key : section + "." + key] = value;
  }
  return kv;
}

namespace {

using KV = std::map<std::string, std::string>;

bool has(const KV& kv, const std::string& k) { return kv.count(k) > 0; }

std::string get(const KV& kv, const std::string& k, const std::string& fallback) {
  auto it = kv.find(k);
  return it == kv.end() ? fallback : it->second;
}

double get_double(const KV& kv, const std::string& k) {
  auto it = kv.find(k);
  if (it == kv.end()) throw ConfigError("missing required key " + k);
  try {
    size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError("invalid numeric value for " + k + ": '" + it->second + "'");
  }
}

double get_double_or(const KV& kv, const std::string& k, double fallback) {
  return has(kv, k) ? get_double(kv, k) : fallback;
}

int get_int_or(const KV& kv, const std::string& k, int fallback) {
  if (!has(kv, k)) return fallback;
  const double v = get_double(kv, k);
  if (v != std::floor(v)) throw ConfigError("expected an integer for " + k);
  return static_cast<int>(v);
}

std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stoi(item));
    } catch (...) {
      throw ConfigError("invalid integer list for " + key + ": '" + s + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + s + "'");
}

}  // namespace

RunConfig load_run_config(const KV& kv) {
  RunConfig cfg;

  const bool physical = has(kv, "problem.nu") || has(kv, "problem.kappa") || has(kv, "problem.lambda");
  const bool direct = has(kv, "problem.mu") || has(kv, "problem.gamma") || has(kv, "problem.delta");
  if (physical && direct)
    throw ConfigError(
        "problem.nu/kappa/lambda and problem.mu/gamma/delta are mutually exclusive");
  if (!physical && !direct)
    throw ConfigError("missing required keys problem.nu/kappa/lambda (or problem.mu/gamma/delta)");
  try {
    if (physical) {
      cfg.params = derive_params(get_double(kv, "problem.nu"), get_double(kv, "problem.kappa"),
                                 get_double(kv, "problem.lambda"));
    } else {
      cfg.params = params_from_coefficients(get_double(kv, "problem.mu"),
                                            get_double(kv, "problem.gamma"),
                                            get_double(kv, "problem.delta"));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("problem parameters: ") + e.what());
  }

  cfg.mms_id = get(kv, "problem.mms", "default");
  if (cfg.mms_id == "none") cfg.mms_id.clear();
  else if (cfg.mms_id != "default")
    throw ConfigError("problem.mms must be 'default' or 'none'");
  const std::string forcing = get(kv, "problem.forcing", cfg.mms_id.empty() ? "zero" : "mms");
  if (forcing == "zero") cfg.mms_id.clear();
  else if (forcing != "mms") throw ConfigError("problem.forcing must be 'mms' or 'zero'");
  cfg.initial = get(kv, "problem.initial", cfg.mms_id.empty() ? "zero" : "mms");
  if (cfg.initial != "mms" && cfg.initial != "zero" && cfg.initial != "rough")
    throw ConfigError("problem.initial must be one of mms|zero|rough");
  if (cfg.initial == "mms" && cfg.mms_id.empty())
    throw ConfigError("problem.initial = mms requires problem.mms = default");
  cfg.rough_amplitude = get_double_or(kv, "problem.rough_amplitude", 0.25);

  const std::string element = get(kv, "discretization.element", "mini");
  if (element == "mini") cfg.element = ElementKind::MINI;
  else if (element == "taylor_hood") cfg.element = ElementKind::TAYLOR_HOOD;
  else if (element == "p1p1") cfg.element = ElementKind::P1_P1;
  else throw ConfigError("discretization.element must be one of mini|taylor_hood|p1p1");
  if (has(kv, "discretization.levels"))
    cfg.levels = parse_int_list(kv.at("discretization.levels"), "discretization.levels");

  const std::string scheme = get(kv, "time.scheme", "implicit_euler");
  if (scheme == "implicit_euler") cfg.scheme.kind = SchemeKind::IMPLICIT_EULER;
  else if (scheme == "bdf2") cfg.scheme.kind = SchemeKind::BDF2;
  else throw ConfigError("time.scheme must be implicit_euler|bdf2");
  cfg.scheme.dt = get_double(kv, "time.dt");
  if (!has(kv, "time.T")) throw ConfigError("missing required key time.T");
  cfg.T = get_double(kv, "time.T");
  if (cfg.T < 0) throw ConfigError("time.T must be >= 0");
  cfg.scheme.picard_tol = get_double_or(kv, "time.picard_tol", 1e-10);
  cfg.scheme.picard_max = get_int_or(kv, "time.picard_max", 50);
  try {
    validate(cfg.scheme);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const std::string rule = get(kv, "time.kernel_rule", "right_rect");
  if (rule == "right_rect") cfg.kernel_rule = KernelRule::RIGHT_RECT;
  else if (rule == "pw_linear") cfg.kernel_rule = KernelRule::PW_LINEAR_EXACT;
  else throw ConfigError("time.kernel_rule must be right_rect|pw_linear");

  const std::string method = get(kv, "solver.method", "uzawa_cg");
  if (method == "uzawa_cg") cfg.solver.method = SolveMethod::UZAWA_CG;
  else if (method == "direct_dense") cfg.solver.method = SolveMethod::DIRECT_DENSE;
  else throw ConfigError("solver.method must be uzawa_cg|direct_dense");
  cfg.solver.tolerance = get_double_or(kv, "solver.tolerance", 1e-10);
  cfg.solver.max_iterations = get_int_or(kv, "solver.max_iterations", 500);
  try {
    validate(cfg.solver);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  if (has(kv, "two_level.coarse_levels"))
    cfg.coarse_levels = parse_int_list(kv.at("two_level.coarse_levels"), "two_level.coarse_levels");
  cfg.fine_n = get_int_or(kv, "two_level.fine_n", 0);
  const std::string fini = get(kv, "two_level.fine_initial", "project");
  if (fini == "project") cfg.fine_initial_prolong = false;
  else if (fini == "prolong") cfg.fine_initial_prolong = true;
  else throw ConfigError("two_level.fine_initial must be project|prolong");
  cfg.spill_path = get(kv, "two_level.spill_path", "");

  cfg.study = get(kv, "study.kind", "all");
  if (cfg.study != "galerkin" && cfg.study != "twolevel" && cfg.study != "coupled" &&
      cfg.study != "all")
    throw ConfigError("study.kind must be galerkin|twolevel|coupled|all");
  if (has(kv, "study.coupled_pairs")) {
    std::stringstream ss(kv.at("study.coupled_pairs"));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      const auto colon = item.find(':');
      if (colon == std::string::npos)
        throw ConfigError("study.coupled_pairs entries must look like H_n:h_n");
      cfg.coupled_pairs.emplace_back(std::stoi(item.substr(0, colon)),
                                     std::stoi(item.substr(colon + 1)));
    }
  }

  cfg.run_method = get(kv, "run.method", "galerkin");
  if (cfg.run_method != "galerkin" && cfg.run_method != "two_level")
    throw ConfigError("run.method must be galerkin|two_level");
  cfg.seed = static_cast<unsigned>(get_int_or(kv, "run.seed", 1));
  cfg.jobs = get_int_or(kv, "run.jobs", 0);

  cfg.out_dir = get(kv, "output.dir", "out");
  cfg.vtk = has(kv, "output.vtk") ? parse_bool(kv.at("output.vtk"), "output.vtk") : false;
  cfg.vtk_every = get_int_or(kv, "output.vtk_every", 0);
  return cfg;
}

RunConfig load_run_config_file(const std::string& path) {
  return load_run_config(parse_config_file(path));
}

Discretization Discretization::create(int n, ElementKind kind) {
  Discretization d;
  d.mesh = std::make_unique<Mesh>(build_unit_square(n));
  d.space = std::make_unique<FESpace>(*d.mesh, kind);
  d.ops = assemble_operators(*d.space);
  return d;
}

Vector rough_initial_coefficients(const FESpace& space, unsigned seed, double amplitude) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unif(-amplitude, amplitude);
  Vector u = Vector::Zero(space.velocity_dofs());
  const int ns = space.scalar_dofs();
  const int nv = space.mesh().num_vertices();
  for (int c = 0; c < 2; ++c)
    for (int v = 0; v < nv; ++v)
      if (!space.scalar_dof_on_boundary(v)) u[c * ns + v] = unif(rng);
  return u;
}

/// The rough field as an evaluable function: a random P1 field on the given
/// mesh, zero on the boundary, so every level can project its own version.
Forcing rough_initial_field(const Mesh& mesh_template, unsigned seed, double amplitude) {
  auto mesh = std::make_shared<Mesh>(mesh_template);
  const int nv = mesh->num_vertices();
  auto coeffs = std::make_shared<std::vector<Eigen::Vector2d>>(nv, Eigen::Vector2d::Zero());
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unif(-amplitude, amplitude);
  for (int v = 0; v < nv; ++v)
    if (!mesh->boundary_vertex[v]) (*coeffs)[v] = Eigen::Vector2d(unif(rng), unif(rng));
  return [mesh, coeffs](const Eigen::Vector2d& x, double) {
    const Location loc = locate_in_coarse(x, *mesh);
    const auto& tri = mesh->triangles[loc.triangle];
    Eigen::Vector2d v = Eigen::Vector2d::Zero();
    for (int i = 0; i < 3; ++i) v += loc.bary[i] * (*coeffs)[tri[i]];
    return v;
  };
}

namespace {

struct ProblemSetup {
  std::optional<MMSCase> mms;
  Forcing forcing;
  Forcing u0;
};

ProblemSetup make_problem(const RunConfig& cfg, const FESpace& space_for_rough) {
  ProblemSetup ps;
  if (!cfg.mms_id.empty()) {
    ps.mms = mms_case(cfg.mms_id, cfg.params);
    ps.forcing = ps.mms->forcing_fn();
  }
  if (cfg.initial == "mms") {
    ps.u0 = ps.mms->velocity_fn();
  } else if (cfg.initial == "rough") {
    ps.u0 = rough_initial_field(space_for_rough.mesh(), cfg.seed, cfg.rough_amplitude);
  }
  return ps;
}

RunSetup make_run_setup(const RunConfig& cfg, const Discretization& d, ProblemSetup& ps) {
  RunSetup setup;
  setup.space = d.space.get();
  setup.ops = &d.ops;
  setup.params = cfg.params;
  setup.scheme = cfg.scheme;
  setup.kernel_rule = cfg.kernel_rule;
  setup.solver = cfg.solver;
  setup.forcing = ps.forcing;
  setup.u0 = ps.u0;
  setup.T = cfg.T;
  return setup;
}

void echo_params(const OldroydParams& p) {
  std::cout << "params: nu=" << format_double(p.nu) << " kappa=" << format_double(p.kappa)
            << " lambda=" << format_double(p.lambda) << " mu=" << format_double(p.mu)
            << " gamma=" << format_double(p.gamma) << " delta=" << format_double(p.delta)
            << "\n";
}

void write_diagnostics_csv(const std::string& path, const std::vector<StepDiagnostics>& diag) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(diag.size());
  for (const auto& d : diag)
    rows.push_back({format_double(d.t), format_double(d.energy), format_double(d.div_residual),
                    std::to_string(d.picard_iterations), format_double(d.kernel_norm)});
  write_csv(path, {"t", "energy", "div_residual", "picard_iterations", "kernel_norm"}, rows);
}

/// Bounded-concurrency map over [0, count).
void parallel_runs(int count, int jobs, const std::function<void(int)>& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(jobs);
  for (int w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

TwoLevelSetup make_two_level_setup(const RunConfig& cfg, const Discretization& coarse,
                                   const Discretization& fine, ProblemSetup& ps) {
  TwoLevelSetup setup;
  setup.coarse_space = coarse.space.get();
  setup.coarse_ops = &coarse.ops;
  setup.fine_space = fine.space.get();
  setup.fine_ops = &fine.ops;
  setup.params = cfg.params;
  setup.scheme = cfg.scheme;
  setup.kernel_rule = cfg.kernel_rule;
  setup.solver = cfg.solver;
  setup.forcing = ps.forcing;
  setup.u0 = ps.u0;
  setup.T = cfg.T;
  setup.fine_initial = cfg.fine_initial_prolong ? TwoLevelSetup::FineInitial::PROLONG
                                                : TwoLevelSetup::FineInitial::PROJECT;
  setup.spill_path = cfg.spill_path;
  return setup;
}

}  // namespace

int cmd_run(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  echo_params(cfg.params);

  if (cfg.run_method == "two_level") {
    if (cfg.coarse_levels.empty() || cfg.fine_n <= 0)
      throw ConfigError("run.method = two_level requires two_level.coarse_levels and two_level.fine_n");
    Discretization coarse = Discretization::create(cfg.coarse_levels[0], cfg.element);
    Discretization fine = Discretization::create(cfg.fine_n, cfg.element);
    ProblemSetup ps = make_problem(cfg, *fine.space);
    TwoLevelResult res = run_two_level(make_two_level_setup(cfg, coarse, fine, ps));
    write_diagnostics_csv(cfg.out_dir + "/run_diagnostics.csv", res.fine_diagnostics);
    if (cfg.vtk) {
      write_vtk(*fine.mesh, cfg.out_dir + "/mesh.vtk");
      write_vtk_fields(*fine.space, res.fine_state.u, res.fine_state.p,
                       cfg.out_dir + "/fields_final.vtk");
    }
    if (ps.mms) {
      const ErrorNorms e = error_norms(res.fine_state, *ps.mms, *fine.space, res.fine_state.t);
      std::cout << "errors: L2_u=" << format_double(e.velocity_l2)
                << " H1_u=" << format_double(e.velocity_h1)
                << " L2_p=" << format_double(e.pressure_l2) << "\n";
    }
    return res.solver_failed ? kExitSolver : kExitOk;
  }

  if (cfg.levels.empty()) throw ConfigError("missing required key discretization.levels");
  Discretization d = Discretization::create(cfg.levels[0], cfg.element);
  ProblemSetup ps = make_problem(cfg, *d.space);
  RunSetup setup = make_run_setup(cfg, d, ps);
  std::vector<std::pair<int, State>> snapshots;
  if (cfg.vtk && cfg.vtk_every > 0)
    setup.recorder = [&](int step, const State& s) {
      if (step % cfg.vtk_every == 0) snapshots.emplace_back(step, s);
    };
  SimulationResult res = run_simulation(setup);
  write_diagnostics_csv(cfg.out_dir + "/run_diagnostics.csv", res.diagnostics);
  if (cfg.vtk) {
    write_vtk(*d.mesh, cfg.out_dir + "/mesh.vtk");
    for (const auto& [step, s] : snapshots) {
      char name[64];
      std::snprintf(name, sizeof(name), "/fields_step%06d.vtk", step);
      write_vtk_fields(*d.space, s.u, s.p, cfg.out_dir + name);
    }
    write_vtk_fields(*d.space, res.final_state.u, res.final_state.p,
                     cfg.out_dir + "/fields_final.vtk");
  }
  if (ps.mms) {
    const ErrorNorms e = error_norms(res.final_state, *ps.mms, *d.space, res.final_state.t);
    std::cout << "errors: L2_u=" << format_double(e.velocity_l2)
              << " H1_u=" << format_double(e.velocity_h1)
              << " L2_p=" << format_double(e.pressure_l2) << "\n";
  }
  return res.solver_failed ? kExitSolver : kExitOk;
}

ConvergenceReport run_convergence_study(const RunConfig& cfg) {
  ConvergenceReport report;
  if (cfg.mms_id.empty())
    throw ConfigError("convergence mode requires problem.mms = default");

  const bool do_galerkin = cfg.study == "galerkin" || cfg.study == "all";
  const bool do_twolevel = cfg.study == "twolevel" || cfg.study == "all";
  const bool do_coupled = cfg.study == "coupled" || cfg.study == "all";

  if (do_galerkin) {
    if (cfg.levels.size() < 3)
      throw ConfigError("galerkin study requires >= 3 entries in discretization.levels");
    std::vector<ConvergenceRow> rows(cfg.levels.size());
    std::vector<char> failed(cfg.levels.size(), 0);
    parallel_runs(static_cast<int>(cfg.levels.size()), cfg.jobs, [&](int i) {
      const int n = cfg.levels[i];
      Discretization d = Discretization::create(n, cfg.element);
      ProblemSetup ps = make_problem(cfg, *d.space);
      RunSetup setup = make_run_setup(cfg, d, ps);
      SimulationResult res = run_simulation(setup);
      ConvergenceRow row;
      row.mode = "galerkin";
      row.h = 1.0 / n;
      row.err = error_norms(res.final_state, *ps.mms, *d.space, res.final_state.t);
      row.wall_ms = res.wall_ms;
      failed[i] = res.solver_failed ? 1 : 0;
      rows[i] = row;
    });
    for (char f : failed) report.solver_failed |= (f != 0);
    for (auto& r : rows) report.rows.push_back(r);
    if (rows.size() >= 3) {
      std::vector<double> hs, e1, e2, e3;
      for (const auto& r : rows) {
        hs.push_back(r.h);
        e1.push_back(r.err.velocity_l2);
        e2.push_back(r.err.velocity_h1);
        e3.push_back(r.err.pressure_l2);
      }
      report.galerkin.l2u = observed_order(e1, hs).slope;
      report.galerkin.h1u = observed_order(e2, hs).slope;
      report.galerkin.l2p = observed_order(e3, hs).slope;
      report.galerkin.valid = true;
    }
  }

  if (do_twolevel) {
    if (cfg.fine_n <= 0 || cfg.coarse_levels.empty())
      throw ConfigError("twolevel study requires two_level.fine_n and two_level.coarse_levels");
    Discretization fine = Discretization::create(cfg.fine_n, cfg.element);
    ProblemSetup ps_fine = make_problem(cfg, *fine.space);
    // Reference: the full nonlinear evolution on the fine space.
    RunSetup ref_setup = make_run_setup(cfg, fine, ps_fine);
    SimulationResult ref;
    std::vector<TwoLevelResult> tl(cfg.coarse_levels.size());
    parallel_runs(static_cast<int>(cfg.coarse_levels.size()) + 1, cfg.jobs, [&](int i) {
      if (i == 0) {
        ref = run_simulation(ref_setup);
      } else {
        const int nH = cfg.coarse_levels[i - 1];
        Discretization coarse = Discretization::create(nH, cfg.element);
        ProblemSetup ps = make_problem(cfg, *fine.space);
        tl[i - 1] = run_two_level(make_two_level_setup(cfg, coarse, fine, ps));
      }
    });
    if (ref.solver_failed) report.solver_failed = true;
    std::vector<double> Hs, g1, g2;
    for (size_t k = 0; k < cfg.coarse_levels.size(); ++k) {
      ConvergenceRow row;
      row.mode = "two_level";
      row.h = 1.0 / cfg.fine_n;
      row.H = 1.0 / cfg.coarse_levels[k];
      row.err = error_norms(tl[k].fine_state, *ps_fine.mms, *fine.space, tl[k].fine_state.t);
      const ErrorNorms gap = gap_norms(ref.final_state, tl[k].fine_state, fine.ops);
      row.gap_h1 = gap.velocity_h1;
      row.gap_p = gap.pressure_l2;
      row.wall_ms = tl[k].coarse_ms + tl[k].transfer_ms + tl[k].fine_ms;
      if (tl[k].solver_failed) report.solver_failed = true;
      report.rows.push_back(row);
      Hs.push_back(row.H);
      g1.push_back(row.gap_h1);
      g2.push_back(row.gap_p);
    }
    if (Hs.size() >= 3) {
      report.twolevel.gap_h1 = observed_order(g1, Hs).slope;
      report.twolevel.gap_p = observed_order(g2, Hs).slope;
      report.twolevel.valid = true;
    }
  }

  if (do_coupled) {
    if (cfg.coupled_pairs.size() < 2)
      throw ConfigError("coupled study requires >= 2 entries in study.coupled_pairs");
    std::vector<ConvergenceRow> rows(cfg.coupled_pairs.size());
    std::vector<char> failed(cfg.coupled_pairs.size(), 0);
    parallel_runs(static_cast<int>(cfg.coupled_pairs.size()), cfg.jobs, [&](int i) {
      const auto [nH, nh] = cfg.coupled_pairs[i];
      Discretization coarse = Discretization::create(nH, cfg.element);
      Discretization fine = Discretization::create(nh, cfg.element);
      ProblemSetup ps = make_problem(cfg, *fine.space);
      TwoLevelResult res = run_two_level(make_two_level_setup(cfg, coarse, fine, ps));
      ConvergenceRow row;
      row.mode = "coupled";
      row.h = 1.0 / nh;
      row.H = 1.0 / nH;
      row.err = error_norms(res.fine_state, *ps.mms, *fine.space, res.fine_state.t);
      row.wall_ms = res.coarse_ms + res.transfer_ms + res.fine_ms;
      failed[i] = res.solver_failed ? 1 : 0;
      rows[i] = row;
    });
    for (char f : failed) report.solver_failed |= (f != 0);
    std::vector<double> hs, errs;
    for (auto& r : rows) {
      report.rows.push_back(r);
      hs.push_back(r.h);
      errs.push_back(r.err.velocity_h1);
    }
    if (hs.size() >= 2) {
      report.coupled_h1_order = observed_order(errs, hs).slope;
      report.coupled_valid = true;
    }
  }
  return report;
}

namespace {

void write_convergence_csv(const std::string& path, const ConvergenceReport& report) {
  std::vector<std::vector<std::string>> rows;
  std::map<std::string, const ConvergenceRow*> prev;
  for (const auto& r : report.rows) {
    const ConvergenceRow* p = prev.count(r.mode) ? prev[r.mode] : nullptr;
    const auto ord = [&](double e_now, double e_prev, double x_now, double x_prev) {
      if (!p || e_now <= 0 || e_prev <= 0) return std::string();
      return format_double(std::log(e_prev / e_now) / std::log(x_prev / x_now));
    };
    const double x_now = r.mode == "two_level" ? r.H : r.h;
    const double x_prev = p ? (r.mode == "two_level" ? p->H : p->h) : 0.0;
    rows.push_back({r.mode, format_double(r.h), r.H > 0 ? format_double(r.H) : "",
                    format_double(r.err.velocity_l2), format_double(r.err.velocity_h1),
                    format_double(r.err.pressure_l2), format_double(r.gap_h1),
                    format_double(r.gap_p),
                    ord(r.err.velocity_l2, p ? p->err.velocity_l2 : 0, x_now, x_prev),
                    ord(r.err.velocity_h1, p ? p->err.velocity_h1 : 0, x_now, x_prev),
                    ord(r.err.pressure_l2, p ? p->err.pressure_l2 : 0, x_now, x_prev),
                    ord(r.gap_h1, p ? p->gap_h1 : 0, x_now, x_prev),
                    ord(r.gap_p, p ? p->gap_p : 0, x_now, x_prev),
                    format_double(r.wall_ms)});
    prev[r.mode] = &r;
  }
  write_csv(path,
            {"mode", "h", "H", "errL2_u", "errH1_u", "errL2_p", "gapH1", "gapP", "order_L2u",
             "order_H1u", "order_L2p", "order_gapH1", "order_gapP", "wall_ms"},
            rows);
}

void write_gnuplot_script(const std::string& path, const std::string& csv) {
  std::ofstream out(path);
  out << "# gnuplot script for the convergence study; consumes " << csv << "\n"
      << "set datafile separator ','\n"
      << "set logscale xy\n"
      << "set key left top\n"
      << "set xlabel 'h (or H)'\n"
      << "set ylabel 'error'\n"
      << "set terminal pngcairo size 900,700\n"
      << "set output 'convergence.png'\n"
      << "plot '" << csv << "' using (strcol(1) eq 'galerkin' ? $2 : 1/0):4 with linespoints title 'Galerkin L2(u)', \\\n"
      << "     '" << csv << "' using (strcol(1) eq 'galerkin' ? $2 : 1/0):5 with linespoints title 'Galerkin H1(u)', \\\n"
      << "     '" << csv << "' using (strcol(1) eq 'galerkin' ? $2 : 1/0):6 with linespoints title 'Galerkin L2(p)', \\\n"
      << "     '" << csv << "' using (strcol(1) eq 'two_level' ? $3 : 1/0):7 with linespoints title 'two-level H1 gap', \\\n"
      << "     '" << csv << "' using (strcol(1) eq 'two_level' ? $3 : 1/0):8 with linespoints title 'two-level p gap', \\\n"
      << "     '" << csv << "' using (strcol(1) eq 'coupled' ? $2 : 1/0):5 with linespoints title 'coupled H1(u)'\n";
}

struct CheckWindow {
  const char* name;
  double lo, hi, value;
  bool enabled;
};

int check_windows(const std::vector<CheckWindow>& windows) {
  int rc = kExitOk;
  for (const auto& w : windows) {
    if (!w.enabled) continue;
    const bool ok = w.value >= w.lo && w.value <= w.hi;
    std::cout << "[check] " << w.name << " = " << format_double(w.value) << " in ["
              << format_double(w.lo) << ", " << format_double(w.hi) << "]: "
              << (ok ? "PASS" : "FAIL") << "\n";
    if (!ok) rc = kExitCheck;
  }
  return rc;
}

}  // namespace

int cmd_convergence(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  echo_params(cfg.params);
  const ConvergenceReport report = run_convergence_study(cfg);
  const std::string csv = cfg.out_dir + "/convergence.csv";
  write_convergence_csv(csv, report);
  write_gnuplot_script(cfg.out_dir + "/convergence_plot.gp", csv);
  if (report.galerkin.valid)
    std::cout << "galerkin slopes: L2_u=" << format_double(report.galerkin.l2u)
              << " H1_u=" << format_double(report.galerkin.h1u)
              << " L2_p=" << format_double(report.galerkin.l2p) << "\n";
  if (report.twolevel.valid)
    std::cout << "two-level slopes: gapH1=" << format_double(report.twolevel.gap_h1)
              << " gapP=" << format_double(report.twolevel.gap_p) << "\n";
  if (report.coupled_valid)
    std::cout << "coupled H1 order: " << format_double(report.coupled_h1_order) << "\n";
  if (report.solver_failed) return kExitSolver;
  if (!cfg.check) return kExitOk;
  return check_windows({
      {"galerkin L2_u order", 1.7, 2.3, report.galerkin.l2u, report.galerkin.valid},
      {"galerkin H1_u order", 0.8, 1.2, report.galerkin.h1u, report.galerkin.valid},
      {"galerkin L2_p order", 0.7, 1.3, report.galerkin.l2p, report.galerkin.valid},
      {"two-level gapH1 order", 1.6, 2.4, report.twolevel.gap_h1, report.twolevel.valid},
      {"two-level gapP vs gapH1 order", -0.4, 0.4,
       report.twolevel.gap_p - report.twolevel.gap_h1, report.twolevel.valid},
      {"coupled H1 order", 0.7, 1.3, report.coupled_h1_order, report.coupled_valid},
  });
}

CompareResult run_compare(const RunConfig& cfg) {
  if (cfg.coarse_levels.empty() || cfg.fine_n <= 0)
    throw ConfigError("compare mode requires two_level.coarse_levels and two_level.fine_n");
  CompareResult out;
  out.H = 1.0 / cfg.coarse_levels[0];
  out.h = 1.0 / cfg.fine_n;

  Discretization coarse = Discretization::create(cfg.coarse_levels[0], cfg.element);
  Discretization fine = Discretization::create(cfg.fine_n, cfg.element);
  ProblemSetup ps = make_problem(cfg, *fine.space);

  RunSetup ref_setup = make_run_setup(cfg, fine, ps);
  const SimulationResult ref = run_simulation(ref_setup);
  out.galerkin_ms = ref.wall_ms;
  out.picard_galerkin = ref.picard_total;

  ProblemSetup ps2 = make_problem(cfg, *fine.space);
  const TwoLevelResult tl = run_two_level(make_two_level_setup(cfg, coarse, fine, ps2));
  out.coarse_ms = tl.coarse_ms;
  out.transfer_ms = tl.transfer_ms;
  out.fine_ms = tl.fine_ms;
  out.twolevel_ms = tl.coarse_ms + tl.transfer_ms + tl.fine_ms;
  out.picard_coarse = tl.coarse_run.picard_total;
  out.ratio = out.twolevel_ms / out.galerkin_ms;
  out.gap = gap_norms(ref.final_state, tl.fine_state, fine.ops);
  if (ps.mms) {
    out.has_exact = true;
    out.err_galerkin = error_norms(ref.final_state, *ps.mms, *fine.space, ref.final_state.t);
    out.err_twolevel = error_norms(tl.fine_state, *ps.mms, *fine.space, tl.fine_state.t);
  }
  out.solver_failed = ref.solver_failed || tl.solver_failed;
  return out;
}

int cmd_compare(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  echo_params(cfg.params);
  const CompareResult r = run_compare(cfg);
  std::vector<std::string> row = {
      format_double(r.H), format_double(r.h), format_double(r.galerkin_ms),
      format_double(r.twolevel_ms), format_double(r.coarse_ms), format_double(r.transfer_ms),
      format_double(r.fine_ms), format_double(r.ratio), std::to_string(r.picard_galerkin),
      std::to_string(r.picard_coarse), format_double(r.gap.velocity_l2),
      format_double(r.gap.velocity_h1), format_double(r.gap.pressure_l2),
      r.has_exact ? format_double(r.err_galerkin.velocity_h1) : "",
      r.has_exact ? format_double(r.err_twolevel.velocity_h1) : ""};
  write_csv(cfg.out_dir + "/compare.csv",
            {"H", "h", "galerkin_ms", "twolevel_ms", "coarse_ms", "transfer_ms", "fine_ms",
             "ratio", "picard_galerkin", "picard_coarse", "gapL2", "gapH1", "gapP",
             "errH1_galerkin", "errH1_twolevel"},
            {row});
  std::cout << "wall-clock ratio (two-level / full Galerkin): " << format_double(r.ratio) << "\n"
            << "H1 gap: " << format_double(r.gap.velocity_h1) << "\n";
  if (r.solver_failed) return kExitSolver;
  if (cfg.check && !(r.ratio < 1.0)) {
    std::cout << "[check] cost ratio " << format_double(r.ratio) << " < 1: FAIL\n";
    return kExitCheck;
  }
  if (cfg.check) std::cout << "[check] cost ratio " << format_double(r.ratio) << " < 1: PASS\n";
  return kExitOk;
}

}  // namespace oldroyd
