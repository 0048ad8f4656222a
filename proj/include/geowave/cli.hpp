// Run configuration, command dispatch and run-directory persistence.
#pragma once

#include <atomic>
#include <algorithm>
#include <chrono>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "geowave/io.hpp"

#ifndef GEOWAVE_VERSION
#define GEOWAVE_VERSION "0.0.0"
#endif

namespace geowave::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNegative = 2;
inline constexpr int kExitConfig = 64;

/// Everything a run depends on. Stored in manifest.json; feeding it back via
/// --config reproduces the run.
struct RunConfig {
  std::string command = "check";
  // coefficients: a model JSON file, or a family name (const means A = I)
  std::string model_file;
  std::string family = "iso_plus";
  // grid: a JSON spec file, or shape + spacing + clamped edges
  std::string grid_file;
  std::string shape = "auto";  // auto | square | disc
  std::string h = "1/32";
  std::string gamma1;  // comma-separated edge names
  // equilibria: a field CSV (its boundary values are the data), or a preset
  std::string equilibrium;
  std::string preset = "saddle";  // zero | saddle | xy | harmonic
  double a = 0.3;
  std::string to;
  std::string to_preset = "xy";
  double to_a = 0.1;
  std::string center = "auto";  // auto | search | x,y
  // dynamics
  std::string action = "dirichlet";
  double T = 0.0;  // 0 selects the command default
  std::string init;
  std::string init_v;
  std::string control;
  std::string target;
  std::string target_v;
  double amplitude = 1e-3;
  std::string x0;  // base point of the flux-action distance, x,y
  double c_T = 1.0;
  // tolerances and budgets
  double eq_tol = 1e-9;
  double cg_tol = 1e-8;
  /// A null control counts as successful when the verified terminal energy
  /// is at most this fraction of the initial energy.
  double energy_tol = 1e-6;
  int max_iters = 500;
  int max_outer = 5;
  double leg_tol = 1e-3;
  int legs = 8;
  double T_leg = 3.0;
  int family_steps = 0;
  int samples = 20;
  bool adversarial = true;
  std::uint64_t seed = 1;
  // sweep
  std::string base = "check";
  std::string param = "a";
  std::string range;
  std::string out = "run";
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RunConfig, command, model_file, family, grid_file, shape, h, gamma1,
                                                equilibrium, preset, a, to, to_preset, to_a, center, action, T, init,
                                                init_v, control, target, target_v, amplitude, x0, c_T, eq_tol, cg_tol,
                                                energy_tol,
                                                max_iters, max_outer, leg_tol, legs, T_leg, family_steps, samples,
                                                adversarial, seed, base, param, range, out)

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"check", "equilibrium", "simulate", "control", "probe", "steer", "sweep"};
  return c;
}

inline json to_json(const RunConfig& c) { return json(c); }

inline RunConfig config_from_json(const json& j) {
  try {
    return j.get<RunConfig>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("run config: ") + e.what());
  }
}

/// "0.03125" or "1/32".
inline double parse_spacing(const std::string& s) {
  const auto slash = s.find('/');
  if (slash == std::string::npos) return io::parse_double(s, "grid spacing");
  const double num = io::parse_double(s.substr(0, slash), "grid spacing");
  const double den = io::parse_double(s.substr(slash + 1), "grid spacing");
  require(den != 0.0, ErrorCode::Config, "grid spacing has a zero denominator");
  return num / den;
}

inline Vec2 parse_point(const std::string& s, const std::string& what) {
  const auto parts = io::split(s, ',');
  require(parts.size() == 2, ErrorCode::Config, what + " must be given as x,y");
  return {io::parse_double(parts[0], what), io::parse_double(parts[1], what)};
}

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  int n = 0;
  std::vector<double> values() const {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
    return v;
  }
};

/// lo:hi:n, n evenly spaced values including both ends.
inline Range parse_range(const std::string& s) {
  const auto parts = io::split(s, ':');
  require(parts.size() == 3, ErrorCode::Config, "range must be lo:hi:n, got '" + s + "'");
  Range r{io::parse_double(parts[0], "range start"), io::parse_double(parts[1], "range end"), 0};
  std::size_t used = 0;
  try {
    r.n = std::stoi(parts[2], &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == parts[2].size() && r.n >= 1, ErrorCode::Config, "range count must be a positive integer");
  return r;
}

inline bool default_disc(const std::string& command) {
  return command == "check" || command == "equilibrium" || command == "steer";
}

/// Checks that do not need the numerics: known names, positive tolerances,
/// referenced files present.
inline void validate(const RunConfig& c) {
  auto in = [](const std::string& v, std::initializer_list<const char*> opts) {
    for (const char* o : opts)
      if (v == o) return true;
    return false;
  };
  const auto& cmds = commands();
  require(std::find(cmds.begin(), cmds.end(), c.command) != cmds.end(), ErrorCode::Config,
          "unknown command '" + c.command + "'");
  require(in(c.shape, {"auto", "square", "disc"}), ErrorCode::Config, "shape must be auto, square or disc");
  require(in(c.preset, {"zero", "saddle", "xy", "harmonic"}), ErrorCode::Config, "unknown preset '" + c.preset + "'");
  require(in(c.to_preset, {"zero", "saddle", "xy", "harmonic"}), ErrorCode::Config,
          "unknown preset '" + c.to_preset + "'");
  require(in(c.action, {"dirichlet", "neumann"}), ErrorCode::Config, "action must be dirichlet or neumann");
  require(parse_spacing(c.h) > 0.0, ErrorCode::Config, "grid spacing must be positive");
  require(c.T >= 0.0, ErrorCode::Config, "T must be non-negative");
  require(c.eq_tol > 0.0 && c.cg_tol > 0.0 && c.leg_tol > 0.0 && c.energy_tol > 0.0, ErrorCode::Config, "tolerances must be positive");
  require(c.max_iters > 0 && c.max_outer > 0 && c.legs > 0 && c.T_leg > 0.0, ErrorCode::Config,
          "iteration counts, legs and T_leg must be positive");
  require(c.samples >= 10, ErrorCode::Config, "the probe needs at least 10 samples");
  require(c.family_steps >= 0, ErrorCode::Config, "family_steps must be non-negative");
  for (const std::string* f : {&c.model_file, &c.grid_file, &c.equilibrium, &c.to, &c.init, &c.init_v, &c.control,
                               &c.target, &c.target_v})
    require(f->empty() || fs::exists(*f), ErrorCode::Config, "file not found: " + *f);
  if (c.center != "auto" && c.center != "search") parse_point(c.center, "center");
  if (!c.x0.empty()) parse_point(c.x0, "x0");
  if (c.command == "sweep") {
    require(c.base != "sweep" && std::find(cmds.begin(), cmds.end(), c.base) != cmds.end(), ErrorCode::Config,
            "sweep base must be one of the other commands");
    require(in(c.param, {"a", "to_a", "T", "amplitude", "c_T", "T_leg"}), ErrorCode::Config,
            "sweep parameter must be a, to_a, T, amplitude, c_T or T_leg");
    parse_range(c.range);
  }
}

// ---------------------------------------------------------------------------
// Inputs

inline CoefficientModel load_model(const RunConfig& c) {
  if (!c.model_file.empty()) return io::model_from_json(io::read_json(c.model_file));
  if (c.family == "const") return CoefficientModel::constant(Sym2::identity());
  return io::model_from_json(json{{"family", c.family}});
}

inline GridSpec load_grid_spec(const RunConfig& c) {
  if (!c.grid_file.empty()) return io::grid_spec_from_json(io::read_json(c.grid_file));
  const double h = parse_spacing(c.h);
  const bool disc = c.shape == "disc" || (c.shape == "auto" && default_disc(c.command));
  GridSpec s = disc ? GridSpec::unit_disc(h) : GridSpec::unit_square(h);
  if (!c.gamma1.empty())
    for (const auto& e : io::split(c.gamma1, ',')) s.gamma1_edges.push_back(io::edge_from_string(e));
  return s;
}

/// Boundary data of the named preset. The harmonic preset is a seeded random
/// combination of Re and Im of z^k, k = 1..4.
inline ScalarField preset_field(const std::string& name, double a, std::uint64_t seed, const DomainGrid& g) {
  if (name == "zero") return ScalarField(g);
  if (name == "saddle") return sample(g, [&](Vec2 p) { return a * (p.x * p.x - p.y * p.y); });
  if (name == "xy") return sample(g, [&](Vec2 p) { return a * p.x * p.y; });
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double re[5], im[5];
  for (int k = 1; k <= 4; ++k) {
    re[k] = u(rng);
    im[k] = u(rng);
  }
  const Vec2 c = g.geometric_center();
  return sample(g, [&](Vec2 p) {
    const std::complex<double> z(p.x - c.x, p.y - c.y);
    std::complex<double> zk(1.0, 0.0);
    double s = 0.0;
    for (int k = 1; k <= 4; ++k) {
      zk *= z;
      s += re[k] * zk.real() + im[k] * zk.imag();
    }
    return a * s;
  });
}

/// An equilibrium with the boundary values of `file` (used as the initial
/// guess as well) or of a preset.
inline EquilibriumSolution load_equilibrium(const CoefficientModel& model, const DomainGrid& g, const RunConfig& c,
                                            const std::string& file, const std::string& preset, double a) {
  EquilibriumOptions eo;
  eo.tol = c.eq_tol;
  EquilibriumSolution s;
  if (!file.empty()) {
    const ScalarField w = io::read_field_csv(file, g);
    s = solve_equilibrium(model, w, g, &w, eo);
  } else {
    s = solve_equilibrium(model, preset_field(preset, a, c.seed, g), g, nullptr, eo);
  }
  require(s.converged, ErrorCode::NotConverged,
          "equilibrium did not converge (residual " + std::to_string(s.residual) + ")");
  return s;
}

/// Lowest clamped mode of the rectangle or a radial bump on the disc; for the
/// flux action a centred Gaussian.
inline ScalarField mode_field(const DomainGrid& g, Action action, double amplitude) {
  const GridSpec& s = g.spec;
  const Vec2 c = g.geometric_center();
  if (action == Action::Neumann) {
    const double w = 0.15 * (s.shape == ShapeKind::Disc ? 2.0 * s.radius : std::min(s.xmax - s.xmin, s.ymax - s.ymin));
    return sample(g, [&](Vec2 p) { return amplitude * std::exp(-(p - c).norm2() / (2 * w * w)); });
  }
  if (s.shape == ShapeKind::Disc)
    return sample(g, [&](Vec2 p) { return amplitude * std::cos(0.5 * kPi * std::min(1.0, (p - c).norm() / s.radius)); });
  return sample(g, [&](Vec2 p) {
    return amplitude * std::sin(kPi * (p.x - s.xmin) / (s.xmax - s.xmin)) * std::sin(kPi * (p.y - s.ymin) / (s.ymax - s.ymin));
  });
}

inline Action parse_action(const std::string& s) { return s == "neumann" ? Action::Neumann : Action::Dirichlet; }

inline GeometryOptions geometry_options(const RunConfig& c) {
  GeometryOptions o;
  if (c.center == "search") {
    o.center_mode = CenterMode::Search;
  } else if (c.center != "auto") {
    o.center_mode = CenterMode::Explicit;
    o.center = parse_point(c.center, "center");
  }
  return o;
}

inline HumOptions hum_options(const RunConfig& c, double T) {
  HumOptions o;
  o.action = parse_action(c.action);
  o.T = T;
  o.c_T = c.c_T;
  if (!c.x0.empty()) o.x0 = parse_point(c.x0, "x0");
  return o;
}

// ---------------------------------------------------------------------------
// Commands

struct RunResult {
  int exit_code = kExitOk;
  json report;
  std::vector<std::string> artifacts;
  std::string message;
};

struct Workspace {
  const RunConfig& cfg;
  fs::path dir;
  RunResult result;

  void write_text(const std::string& name, const std::string& text) {
    io::write_text(dir / name, text);
    result.artifacts.push_back(name);
  }
  void write_field(const std::string& name, const DomainGrid& g, const ScalarField& f) {
    write_text(name, io::field_csv(g, f));
  }
};

inline void cmd_check(Workspace& ws) {
  const RunConfig& c = ws.cfg;
  const CoefficientModel model = load_model(c);
  const DomainGrid g = build_grid(load_grid_spec(c));
  const auto eq = load_equilibrium(model, g, c, c.equilibrium, c.preset, c.a);
  const auto rep = proposition_1_1(model, eq.w, g, geometry_options(c));
  ws.result.report = io::to_json(rep);
  ws.result.report["equilibrium"] = io::to_json(eq);
  ws.write_field("w.csv", g, eq.w);
  ws.write_field("curvature.csv", g, rep.curvature);
  ws.write_field("rho.csv", g, rep.rho);
  ws.write_field("worst_eig.csv", g, rep.worst_eig);
  ws.result.exit_code = rep.controllable ? kExitOk : kExitNegative;
}

inline void cmd_equilibrium(Workspace& ws) {
  const RunConfig& c = ws.cfg;
  const CoefficientModel model = load_model(c);
  const DomainGrid g = build_grid(load_grid_spec(c));
  EquilibriumOptions eo;
  eo.tol = c.eq_tol;
  const ScalarField data = c.equilibrium.empty() ? preset_field(c.preset, c.a, c.seed, g)
                                                 : io::read_field_csv(c.equilibrium, g);
  const auto eq = solve_equilibrium(model, data, g, c.equilibrium.empty() ? nullptr : &data, eo);
  ws.result.report = io::to_json(eq);
  ws.write_field("w.csv", g, eq.w);
  if (eq.converged && c.family_steps > 0) {
    const auto fam = alpha_family(model, eq, g, c.family_steps, eo);
    json members = json::array();
    for (std::size_t k = 0; k < fam.alphas.size(); ++k) {
      const std::string name = "family/alpha_" + std::to_string(k) + ".csv";
      ws.write_field(name, g, fam.solutions[k].w);
      members.push_back({{"alpha", fam.alphas[k]}, {"file", name}, {"residual", io::num(fam.solutions[k].residual)}});
    }
    json fj{{"members", members},
            {"max_norm_bound", io::num(fam.max_norm_bound)},
            {"step_bound", io::num(fam.step_bound)},
            {"bisections", fam.bisections}};
    ws.write_text("family/manifest.json", fj.dump(2) + "\n");
    ws.result.report["family"] = fj;
  }
  ws.result.exit_code = eq.converged ? kExitOk : kExitNegative;
}

inline void cmd_simulate(Workspace& ws) {
  const RunConfig& c = ws.cfg;
  const CoefficientModel model = load_model(c);
  const DomainGrid g = build_grid(load_grid_spec(c));
  const auto eq = load_equilibrium(model, g, c, c.equilibrium, c.equilibrium.empty() ? "zero" : c.preset, c.a);
  const Action action = parse_action(c.action);
  const double T = c.T > 0.0 ? c.T : 4.0;
  WaveState init{c.init.empty() ? axpy(1.0, mode_field(g, Action::Dirichlet, c.amplitude), eq.w)
                                : io::read_field_csv(c.init, g),
                 c.init_v.empty() ? ScalarField(g) : io::read_field_csv(c.init_v, g), 0.0};
  if (c.init.empty() && action == Action::Dirichlet)
    for (int k : g.boundary_nodes) init.u[k] = eq.w[k];
  ControlSignal control;
  if (!c.control.empty()) {
    control = io::read_control_csv(c.control, control_kind(action));
  } else {
    // hold the stationary boundary data of the equilibrium
    const LinearWaveSystem sys = make_system(action, model, eq.w, g);
    const TimeGrid tg = TimeGrid::for_system(T, g.h, sys.lambda_max);
    control = ControlSignal::zero(control_kind(action), tg, sys.dofs.control_nodes);
    const Vec data = equilibrium_boundary_data(model, eq.w, sys);
    for (int n = 0; n < tg.levels(); ++n) control.values.row(n) = data.transpose();
  }
  const auto res = simulate_quasilinear(model, g, control, init, eq.w);
  const double e0 = res.energy.samples.empty() ? 0.0 : res.energy.samples.front().e_lin;
  ws.result.report = io::to_json(res, e0);
  ws.result.report["T"] = control.time.T;
  ws.result.report["action"] = to_string(action);
  ws.write_text("energy.csv", io::energy_csv(res.energy));
  ws.write_field("final_u.csv", g, res.final_state.u);
  ws.write_field("final_v.csv", g, res.final_state.v);
  ws.result.exit_code = res.completed ? kExitOk : kExitNegative;
}

inline void cmd_control(Workspace& ws) {
  const RunConfig& c = ws.cfg;
  const CoefficientModel model = load_model(c);
  const DomainGrid g = build_grid(load_grid_spec(c));
  const auto eq = load_equilibrium(model, g, c, c.equilibrium, c.equilibrium.empty() ? "zero" : c.preset, c.a);
  const Action action = parse_action(c.action);
  const double T = c.T > 0.0 ? c.T : (action == Action::Neumann ? 4.0 : 3.0);
  const HumOperator op(model, eq.w, g, hum_options(c, T));
  const LinearWaveSystem& sys = op.system();
  const ScalarField v0 = c.target.empty() ? mode_field(g, action, c.amplitude) : io::read_field_csv(c.target, g);
  const ScalarField v1 = c.target_v.empty() ? ScalarField(g) : io::read_field_csv(c.target_v, g);
  KrylovOptions ko;
  ko.tol = c.cg_tol;
  ko.max_iters = c.max_iters;
  const auto r = solve_null_control(op, sys.gather(v0), sys.gather(v1), ko);
  const bool controlled = r.initial_energy == 0.0 || r.terminal_energy <= c.energy_tol * r.initial_energy;
  ws.result.report = io::to_json(r);
  ws.result.report["controlled"] = controlled;
  ws.result.report["T"] = T;
  ws.result.report["action"] = to_string(action);
  ws.result.report["knee"] = op.knee();
  ws.result.report["time_steps"] = op.time().steps;
  ws.result.report["lambda_T"] = action == Action::Neumann ? io::num(op.lambda_T()) : json(nullptr);
  ws.write_text("control.csv", io::control_csv(r.control));
  ws.write_text("residuals.csv", io::series_csv("residual", r.residual_history));
  ws.write_field("phi0.csv", g, sys.scatter(r.phi0));
  ws.write_field("phi1.csv", g, sys.scatter(r.phi1));
  ws.result.exit_code = controlled ? kExitOk : kExitNegative;
}

inline void cmd_probe(Workspace& ws) {
  const RunConfig& c = ws.cfg;
  const CoefficientModel model = load_model(c);
  const DomainGrid g = build_grid(load_grid_spec(c));
  const auto eq = load_equilibrium(model, g, c, c.equilibrium, c.equilibrium.empty() ? "zero" : c.preset, c.a);
  const double T = c.T > 0.0 ? c.T : 3.0;
  const HumOperator op(model, eq.w, g, hum_options(c, T));
  const auto p = observability_probe(op, c.samples, c.seed, c.adversarial);
  const bool observable = p.c1_hat > 1e-6;
  ws.result.report = io::to_json(p);
  ws.result.report["T"] = T;
  ws.result.report["observable"] = observable;
  ws.write_text("samples.csv", io::series_csv("observation", p.values));
  ws.result.exit_code = observable ? kExitOk : kExitNegative;
}

inline void cmd_steer(Workspace& ws) {
  const RunConfig& c = ws.cfg;
  const CoefficientModel model = load_model(c);
  const DomainGrid g = build_grid(load_grid_spec(c));
  const auto w1 = load_equilibrium(model, g, c, c.equilibrium, c.preset, c.a);
  const auto w2 = load_equilibrium(model, g, c, c.to, c.to_preset, c.to_a);
  GlobalSteerOptions o;
  o.family_steps = c.legs;
  o.T_leg = c.T_leg;
  o.leg_tol = c.leg_tol;
  o.local.action = parse_action(c.action);
  o.local.max_outer = c.max_outer;
  o.local.c_T = c.c_T;
  if (!c.x0.empty()) o.local.x0 = parse_point(c.x0, "x0");
  o.equilibrium.tol = c.eq_tol;
  o.geometry = geometry_options(c);
  const auto plan = steer_global(model, w1, w2, g, o);
  ws.result.report = io::to_json(plan);
  for (std::size_t l = 0; l < plan.legs.size(); ++l)
    ws.write_text("legs/leg_" + std::to_string(l) + "_control.csv", io::control_csv(plan.legs[l].control));
  ws.write_field("final_u.csv", g, plan.final_state.u);
  ws.write_field("final_v.csv", g, plan.final_state.v);
  ws.result.exit_code = plan.completed ? kExitOk : kExitNegative;
}

inline RunResult run(const RunConfig& cfg, std::ostream& log = std::cerr);

/// Worker count from GEOWAVE_THREADS, else the hardware concurrency.
inline int pool_size() {
  if (const char* e = std::getenv("GEOWAVE_THREADS")) {
    const int n = std::atoi(e);
    if (n > 0) return n;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Scalar report fields copied into the sweep aggregate, per base command.
inline const std::vector<std::string>& aggregate_keys(const std::string& base) {
  static const std::map<std::string, std::vector<std::string>> keys{
      {"check", {"verdict", "kappa", "rho0", "T0", "ball_radius"}},
      {"equilibrium", {"converged", "residual", "newton_iterations"}},
      {"simulate", {"completed", "e_lin_growth", "monitor_holds"}},
      {"control", {"controlled", "iterations", "energy_ratio"}},
      {"probe", {"observable", "c1_hat", "c2_hat"}},
      {"steer", {"completed", "final_error"}},
  };
  return keys.at(base);
}

inline void set_param(RunConfig& c, const std::string& p, double v) {
  if (p == "a") c.a = v;
  else if (p == "to_a") c.to_a = v;
  else if (p == "T") c.T = v;
  else if (p == "amplitude") c.amplitude = v;
  else if (p == "c_T") c.c_T = v;
  else if (p == "T_leg") c.T_leg = v;
}

inline std::string cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_number_float()) return io::fmt(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

inline void cmd_sweep(Workspace& ws, std::ostream& log) {
  const RunConfig& c = ws.cfg;
  const auto values = parse_range(c.range).values();
  std::vector<RunResult> results(values.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&]() {
    for (std::size_t i = next++; i < values.size(); i = next++) {
      RunConfig sub = c;
      sub.command = c.base;
      sub.out = (ws.dir / ("run_" + std::to_string(i))).string();
      set_param(sub, c.param, values[i]);
      std::ostringstream sublog;
      results[i] = run(sub, sublog);
      std::lock_guard<std::mutex> lock(log_mutex);
      log << sublog.str();
    }
  };
  const int n = std::min<int>(pool_size(), static_cast<int>(values.size()));
  std::vector<std::thread> pool;
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  const auto& keys = aggregate_keys(c.base);
  std::string csv = "index," + c.param + ",exit_code";
  for (const auto& k : keys) csv += "," + k;
  csv += "\n";
  json runs = json::array();
  bool failed = false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const RunResult& r = results[i];
    failed = failed || (r.exit_code != kExitOk && r.exit_code != kExitNegative);
    csv += std::to_string(i) + "," + io::fmt(values[i]) + "," + std::to_string(r.exit_code);
    json entry{{"index", i}, {"value", values[i]}, {"exit_code", r.exit_code}, {"dir", "run_" + std::to_string(i)}};
    for (const auto& k : keys) {
      const json v = r.report.is_object() && r.report.contains(k) ? r.report[k] : json(nullptr);
      csv += "," + cell(v);
      entry[k] = v;
    }
    csv += "\n";
    runs.push_back(entry);
  }
  ws.write_text("aggregate.csv", csv);
  ws.result.report = {{"base", c.base}, {"param", c.param}, {"runs", runs}};
  ws.result.exit_code = failed ? kExitError : kExitOk;
}

/// Execute one run: validate, dispatch, write report.json and manifest.json.
/// Errors become exit codes; nothing escapes.
inline RunResult run(const RunConfig& cfg, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  Workspace ws{cfg, fs::path(cfg.out), {}};
  try {
    validate(cfg);
    fs::create_directories(ws.dir);
    if (cfg.command == "check") cmd_check(ws);
    else if (cfg.command == "equilibrium") cmd_equilibrium(ws);
    else if (cfg.command == "simulate") cmd_simulate(ws);
    else if (cfg.command == "control") cmd_control(ws);
    else if (cfg.command == "probe") cmd_probe(ws);
    else if (cfg.command == "steer") cmd_steer(ws);
    else cmd_sweep(ws, log);
  } catch (const Error& e) {
    ws.result.exit_code = e.code() == ErrorCode::Config ? kExitConfig : kExitError;
    ws.result.message = e.what();
  } catch (const std::exception& e) {
    ws.result.exit_code = kExitError;
    ws.result.message = e.what();
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!ws.result.message.empty()) log << "geowave " << cfg.command << ": " << ws.result.message << "\n";
  if (ws.result.exit_code == kExitConfig) return ws.result;
  try {
    json report = ws.result.report.is_null() ? json::object() : ws.result.report;
    report["command"] = cfg.command;
    report["exit_code"] = ws.result.exit_code;
    if (!ws.result.message.empty()) report["error"] = ws.result.message;
    ws.result.report = report;
    io::write_json(ws.dir / "report.json", report);
    json manifest;
    manifest["config"] = to_json(cfg);
    manifest["version"] = GEOWAVE_VERSION;
    manifest["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION);
    manifest["timings"] = {{"total_seconds", seconds}};
    manifest["exit_code"] = ws.result.exit_code;
    manifest["artifacts"] = ws.result.artifacts;
    io::write_json(ws.dir / "manifest.json", manifest);
  } catch (const std::exception& e) {
    log << "geowave " << cfg.command << ": " << e.what() << "\n";
    ws.result.exit_code = kExitError;
  }
  log << "geowave " << cfg.command << ": exit " << ws.result.exit_code << " (" << ws.dir.string() << ")\n";
  return ws.result;
}

}  // namespace geowave::cli
