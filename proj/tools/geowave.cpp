// geowave command-line front end.
#include <functional>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "geowave/cli.hpp"

namespace {

using geowave::cli::RunConfig;

/// Options bound to RunConfig members; after parsing, the ones given on the
/// command line are copied over the --config base.
class Binder {
 public:
  explicit Binder(RunConfig& parsed) : parsed_(parsed) {}

  template <class T>
  void add(CLI::App* app, const std::string& flags, T RunConfig::*member, const std::string& help) {
    CLI::Option* opt = app->add_option(flags, parsed_.*member, help)->capture_default_str();
    bound_.push_back({opt, [member](RunConfig& dst, const RunConfig& src) { dst.*member = src.*member; }});
  }
  void flag(CLI::App* app, const std::string& flags, bool RunConfig::*member, const std::string& help) {
    CLI::Option* opt = app->add_flag(flags, parsed_.*member, help);
    bound_.push_back({opt, [member](RunConfig& dst, const RunConfig& src) { dst.*member = src.*member; }});
  }

  RunConfig merge(RunConfig base) const {
    for (const auto& [opt, copy] : bound_)
      if (opt->count() > 0) copy(base, parsed_);
    return base;
  }

 private:
  RunConfig& parsed_;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&, const RunConfig&)>>> bound_;
};

void common(Binder& b, CLI::App* s) {
  b.add(s, "--out,-o", &RunConfig::out, "Run directory");
  b.add(s, "--model", &RunConfig::model_file, "Coefficient model JSON");
  b.add(s, "--family", &RunConfig::family, "Built-in family: iso_plus, iso_inv, const, div_iso");
  b.add(s, "--grid", &RunConfig::grid_file, "Grid spec JSON");
  b.add(s, "--shape", &RunConfig::shape, "auto, square or disc");
  b.add(s, "--h", &RunConfig::h, "Grid spacing, e.g. 1/48");
  b.add(s, "--gamma1", &RunConfig::gamma1, "Clamped edges of the square, comma separated");
  b.add(s, "--equilibrium", &RunConfig::equilibrium, "Equilibrium field CSV");
  b.add(s, "--preset", &RunConfig::preset, "zero, saddle, xy or harmonic");
  b.add(s, "--a", &RunConfig::a, "Preset amplitude");
  b.add(s, "--eq-tol", &RunConfig::eq_tol, "Equilibrium residual tolerance");
  b.add(s, "--seed", &RunConfig::seed, "Random seed");
  b.add(s, "--T", &RunConfig::T, "Horizon (0: command default)");
  b.add(s, "--action", &RunConfig::action, "dirichlet or neumann");
  b.add(s, "--center", &RunConfig::center, "auto, search or x,y");
  b.add(s, "--x0", &RunConfig::x0, "Flux action base point x,y");
  b.add(s, "--c-T", &RunConfig::c_T, "Constant c_T of the flux law");
}

}  // namespace

int main(int argc, char** argv) {
  namespace gc = geowave::cli;
  CLI::App app{"geowave: controllability checks and HUM controls for quasilinear waves"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  RunConfig parsed;
  Binder b(parsed);
  std::string config_file;
  app.add_option("--config", config_file, "Replay a stored RunConfig (manifest.json or config JSON)");

  auto* check = app.add_subcommand("check", "Geometric controllability check of an equilibrium");
  auto* equilibrium = app.add_subcommand("equilibrium", "Solve for an equilibrium and its alpha family");
  auto* simulate = app.add_subcommand("simulate", "Quasilinear simulation under a boundary control");
  auto* control = app.add_subcommand("control", "HUM null control of the linearized system");
  auto* probe = app.add_subcommand("probe", "Empirical observability constants");
  auto* steer = app.add_subcommand("steer", "Steer between two equilibria along their alpha families");
  auto* sweep = app.add_subcommand("sweep", "Run another command over a parameter range");
  for (auto* s : {check, equilibrium, simulate, control, probe, steer, sweep}) {
    common(b, s);
    s->add_option("--config", config_file, "Replay a stored RunConfig");
  }
  b.add(equilibrium, "--family-steps", &RunConfig::family_steps, "Members of the alpha family (0: none)");
  for (auto* s : {simulate, control}) {
    b.add(s, "--amplitude", &RunConfig::amplitude, "Amplitude of the built-in data");
    b.add(s, "--init", &RunConfig::init, "Initial displacement CSV");
    b.add(s, "--init-v", &RunConfig::init_v, "Initial velocity CSV");
  }
  b.add(simulate, "--control", &RunConfig::control, "Control CSV (default: hold the equilibrium data)");
  b.add(control, "--target", &RunConfig::target, "Displacement deviation to bring to rest (CSV)");
  b.add(control, "--target-v", &RunConfig::target_v, "Velocity to bring to rest (CSV)");
  b.add(control, "--cg-tol", &RunConfig::cg_tol, "Krylov relative residual tolerance");
  b.add(control, "--max-iters", &RunConfig::max_iters, "Krylov iteration cap");
  b.add(control, "--energy-tol", &RunConfig::energy_tol, "Accepted terminal energy fraction");
  b.add(probe, "--samples", &RunConfig::samples, "Random samples (at least 10)");
  b.add(probe, "--adversarial", &RunConfig::adversarial, "Include the centred bump sample");
  b.add(steer, "--from", &RunConfig::equilibrium, "Start equilibrium CSV");
  b.add(steer, "--to", &RunConfig::to, "End equilibrium CSV");
  b.add(steer, "--to-preset", &RunConfig::to_preset, "End preset when --to is absent");
  b.add(steer, "--to-a", &RunConfig::to_a, "End preset amplitude");
  b.add(steer, "--legs", &RunConfig::legs, "Legs per family");
  b.add(steer, "--T-leg", &RunConfig::T_leg, "Horizon of each leg");
  b.add(steer, "--leg-tol", &RunConfig::leg_tol, "Leg acceptance threshold");
  b.add(steer, "--max-outer", &RunConfig::max_outer, "Outer iterations per leg");
  b.add(sweep, "--base", &RunConfig::base, "Command to sweep");
  b.add(sweep, "--param", &RunConfig::param, "Swept parameter");
  b.add(sweep, "--range", &RunConfig::range, "lo:hi:n");
  b.add(sweep, "--to-a", &RunConfig::to_a, "End preset amplitude (steer)");
  b.add(sweep, "--legs", &RunConfig::legs, "Legs per family (steer)");
  b.add(sweep, "--amplitude", &RunConfig::amplitude, "Data amplitude (simulate, control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : gc::kExitConfig;
  }

  RunConfig base;
  if (!config_file.empty()) {
    try {
      auto j = geowave::io::read_json(config_file);
      base = gc::config_from_json(j.contains("config") ? j["config"] : j);
    } catch (const std::exception& e) {
      std::cerr << "geowave: " << e.what() << "\n";
      return gc::kExitConfig;
    }
  }
  RunConfig cfg = b.merge(base);
  cfg.command = app.get_subcommands().front()->get_name();
  return gc::run(cfg).exit_code;
}
