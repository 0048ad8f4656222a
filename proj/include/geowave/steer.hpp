// Quasilinear steering: defect correction around a linearized HUM solve, and
// chained legs along the boundary-scaled families of equilibria.
#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "geowave/equilibria.hpp"
#include "geowave/geometry.hpp"
#include "geowave/hum.hpp"

namespace geowave {

struct SteerOptions {
  Action action = Action::Dirichlet;
  double T = 3.0;
  int max_outer = 5;
  /// Acceptance threshold on the relative terminal error.
  double tol = 1e-3;
  /// Time step of the linear problem as a fraction of h / sqrt(lambda_max);
  /// a little below the quasilinear factor so both runs share the control grid.
  double cfl = 0.38;
  std::optional<double> T0;
  double c_T = 1.0;
  std::optional<Vec2> x0;
  KrylovOptions krylov{KrylovMethod::ConjugateResidual, 1e-10, 800, 100, 0.9, true};
  QuasilinearOptions quasilinear{0.4, 1e12, 1e-4, false, 1};
};

struct LegRecord {
  /// Relative terminal error after each outer iteration.
  std::vector<double> errors;
  int outer_iterations = 0;
  int krylov_iterations = 0;
  bool accepted = false;
  bool diverged = false;
  double achieved_error = 0.0;
  /// Error of an independent re-simulation of the stored control.
  double verified_error = 0.0;
  double move_energy = 0.0;
  std::string diagnostic;
  ControlSignal control;
};

struct SteerResult {
  LegRecord leg;
  WaveState final_state;
};

/// Stationary boundary data of an equilibrium for one action: its trace on the
/// controlled boundary, or the flux that holds it at rest.
inline Vec equilibrium_boundary_data(const CoefficientModel& model, const ScalarField& w, const LinearWaveSystem& sys) {
  const DomainGrid& g = sys.grid;
  Vec out(sys.m());
  if (sys.action == Action::Dirichlet) {
    for (int b = 0; b < sys.m(); ++b) out[b] = w[sys.dofs.control_nodes[static_cast<std::size_t>(b)]];
    return out;
  }
  const auto f = q1::internal_force(model, g, w.v);
  for (int b = 0; b < sys.m(); ++b)
    out[b] = f[static_cast<std::size_t>(sys.dofs.control_nodes[static_cast<std::size_t>(b)])] / sys.ell[b];
  return out;
}

/// Relative energy of a terminal mismatch, sqrt(E(error) / E(move)), with A
/// frozen at `A`; if the move is zero the absolute value is returned.
inline double relative_error(const DomainGrid& g, const std::vector<Sym2>& A, const WaveState& reached,
                             const ScalarField& u_target, const ScalarField& v_target, double move_energy) {
  const double e = field_energy(g, A, axpy(-1.0, u_target, reached.u), axpy(-1.0, v_target, reached.v));
  return move_energy > 0.0 ? std::sqrt(e / move_energy) : std::sqrt(e);
}

/// Steer the quasilinear system from `init` to (u_target, v_target) in time T
/// with the HUM control of the linearization at w_from, corrected by the
/// observed terminal mismatch until the relative error is below tol.
inline SteerResult steer_local(const CoefficientModel& model, const ScalarField& w_from, const WaveState& init,
                               const ScalarField& u_target, const ScalarField& v_target, const DomainGrid& g,
                               const SteerOptions& opt) {
  check_shape(w_from, g);
  check_shape(u_target, g);
  check_shape(v_target, g);
  HumOptions ho;
  ho.action = opt.action;
  ho.T = opt.T;
  ho.cfl = opt.cfl;
  ho.T0 = opt.T0;
  ho.c_T = opt.c_T;
  ho.x0 = opt.x0;
  const HumOperator op(model, w_from, g, ho);
  const LinearWaveSystem& sys = op.system();
  const TimeGrid& tg = op.time();

  // boundary lift: a smooth blend of the stationary data of the end states
  const Vec data_w = equilibrium_boundary_data(model, w_from, sys);
  Vec from(sys.m()), to(sys.m());
  if (sys.action == Action::Dirichlet) {
    for (int b = 0; b < sys.m(); ++b) {
      from[b] = init.u[sys.dofs.control_nodes[static_cast<std::size_t>(b)]];
      to[b] = u_target[sys.dofs.control_nodes[static_cast<std::size_t>(b)]];
    }
  } else {
    from = equilibrium_boundary_data(model, init.u, sys);
    to = equilibrium_boundary_data(model, u_target, sys);
  }
  Eigen::MatrixXd lift(tg.levels(), sys.m());
  for (int n = 0; n < tg.levels(); ++n) {
    const double s = 1.0 - smooth_drop(tg.t(n) / tg.T);
    lift.row(n) = (from + s * (to - from)).transpose();
  }
  Eigen::MatrixXd lift_dev = lift;
  lift_dev.rowwise() -= data_w.transpose();

  const LinearState X0{sys.gather(axpy(-1.0, w_from, init.u)), sys.gather(init.v)};
  LinearState Y{sys.gather(axpy(-1.0, w_from, u_target)), sys.gather(v_target)};
  const std::vector<Sym2> A = coefficient_field(model, w_from, g);
  SteerResult out;
  LegRecord& leg = out.leg;
  leg.move_energy = field_energy(g, A, axpy(-1.0, init.u, u_target), axpy(-1.0, init.v, v_target));

  auto run = [&](const Eigen::MatrixXd& values) {
    ControlSignal c = op.control_signal(values);
    return simulate_quasilinear(model, g, c, init, w_from, opt.quasilinear);
  };

  Eigen::MatrixXd values = lift;
  for (int k = 0; k < opt.max_outer; ++k) {
    // the linear correction: G dg = X0 - Backward(Y, lift)
    const LinearState back = propagate(sys, Y, lift_dev, tg, true);
    const Vec rhs_u = X0.u - back.u, rhs_v = X0.v - back.v;
    Eigen::MatrixXd dg = Eigen::MatrixXd::Zero(tg.levels(), sys.m());
    if (rhs_u.squaredNorm() + rhs_v.squaredNorm() > 0.0) {
      const auto kr = solve_gram(op, op.stack(rhs_v, -rhs_u), opt.krylov);
      leg.krylov_iterations += kr.iterations;
      dg = op.control_from_trace(op.trace(kr.x));
    }
    values = lift + dg;
    const auto res = run(values);
    ++leg.outer_iterations;
    if (!res.completed) {
      leg.diverged = true;
      leg.diagnostic = "quasilinear run failed: " + res.diagnostic;
      out.final_state = res.final_state;
      break;
    }
    const double err = relative_error(g, A, res.final_state, u_target, v_target, leg.move_energy);
    leg.errors.push_back(err);
    leg.achieved_error = err;
    out.final_state = res.final_state;
    if (err <= opt.tol) {
      leg.accepted = true;
      break;
    }
    if (k > 0 && err > leg.errors[leg.errors.size() - 2]) {
      leg.diverged = true;
      leg.diagnostic = "outer loop mismatch grew from " + std::to_string(leg.errors[leg.errors.size() - 2]) + " to " +
                       std::to_string(err) + " at move energy " + std::to_string(leg.move_energy);
      break;
    }
    // defect correction on the terminal target
    Y.u -= sys.gather(axpy(-1.0, u_target, res.final_state.u));
    Y.v -= sys.gather(axpy(-1.0, v_target, res.final_state.v));
  }
  if (!leg.accepted && leg.diagnostic.empty())
    leg.diagnostic = "outer loop reached " + std::to_string(opt.max_outer) + " iterations";
  leg.control = op.control_signal(values);
  const auto check = run(values);
  leg.verified_error = check.completed
                           ? relative_error(g, A, check.final_state, u_target, v_target, leg.move_energy)
                           : std::numeric_limits<double>::infinity();
  return out;
}

struct GlobalSteerOptions {
  int family_steps = 8;
  double T_leg = 3.0;
  /// Per-leg acceptance threshold.
  double leg_tol = 1e-3;
  SteerOptions local;
  EquilibriumOptions equilibrium;
  GeometryOptions geometry;
};

struct Waypoint {
  int family = 0;  // 0: start family, 1: end family
  double alpha = 0.0;
  bool controllable = false;
  std::optional<double> T0;
};

struct SteeringPlan {
  std::vector<Waypoint> waypoints;
  std::vector<LegRecord> legs;
  bool geometry_ok = true;
  bool completed = false;
  std::string failure;
  /// sqrt(E(final - (w_end, 0)) / E(w_end - w_start, 0)).
  double final_error = 0.0;
  WaveState final_state;
};

/// Descend the family of w_start to the zero equilibrium and climb the family
/// of w_end, steering one leg between consecutive waypoints, each leg
/// linearized at the waypoint it leaves and started from the state reached.
inline SteeringPlan steer_global(const CoefficientModel& model, const EquilibriumSolution& w_start,
                                 const EquilibriumSolution& w_end, const DomainGrid& g,
                                 const GlobalSteerOptions& opt) {
  require(opt.family_steps >= 1, ErrorCode::InvalidArgument, "family_steps must be at least 1");
  SteeringPlan plan;
  const ScalarField zero(g);
  plan.final_state = {w_start.w, zero, 0.0};
  if (max_abs(g, axpy(-1.0, w_start.w, w_end.w)) == 0.0) {
    plan.completed = true;
    return plan;
  }
  const AlphaFamily fs = alpha_family(model, w_start, g, opt.family_steps, opt.equilibrium);
  const AlphaFamily fe = alpha_family(model, w_end, g, opt.family_steps, opt.equilibrium);
  std::vector<const ScalarField*> fields;
  for (int k = opt.family_steps; k >= 0; --k) {
    plan.waypoints.push_back({0, fs.alphas[static_cast<std::size_t>(k)], false, std::nullopt});
    fields.push_back(&fs.solutions[static_cast<std::size_t>(k)].w);
  }
  for (int k = 1; k <= opt.family_steps; ++k) {
    plan.waypoints.push_back({1, fe.alphas[static_cast<std::size_t>(k)], false, std::nullopt});
    fields.push_back(&fe.solutions[static_cast<std::size_t>(k)].w);
  }
  for (std::size_t p = 0; p < fields.size(); ++p) {
    const auto rep = proposition_1_1(model, *fields[p], g, opt.geometry);
    plan.waypoints[p].controllable = rep.controllable;
    plan.waypoints[p].T0 = rep.T0;
    if (!rep.controllable && plan.geometry_ok) {
      plan.geometry_ok = false;
      plan.failure = "waypoint " + std::to_string(p) + " (family " + std::to_string(plan.waypoints[p].family) +
                     ", alpha " + std::to_string(plan.waypoints[p].alpha) + ") fails the controllability check";
    }
  }
  if (!plan.geometry_ok) return plan;

  WaveState state{w_start.w, zero, 0.0};
  for (std::size_t p = 0; p + 1 < fields.size(); ++p) {
    SteerOptions lo = opt.local;
    lo.T = opt.T_leg;
    lo.tol = opt.leg_tol;
    lo.T0 = plan.waypoints[p].T0;
    auto res = steer_local(model, *fields[p], state, *fields[p + 1], zero, g, lo);
    plan.legs.push_back(std::move(res.leg));
    state = res.final_state;
    state.t = 0.0;
    const LegRecord& leg = plan.legs.back();
    if (!leg.accepted) {
      plan.failure = "leg " + std::to_string(p) + " between alpha " + std::to_string(plan.waypoints[p].alpha) +
                     " and " + std::to_string(plan.waypoints[p + 1].alpha) + " reached error " +
                     std::to_string(leg.achieved_error) + ": " + leg.diagnostic;
      plan.final_state = state;
      return plan;
    }
  }
  plan.final_state = state;
  const auto A = coefficient_field(model, w_end.w, g);
  const double move = field_energy(g, A, axpy(-1.0, w_start.w, w_end.w), zero);
  plan.final_error = relative_error(g, A, state, w_end.w, zero, move);
  plan.completed = true;
  return plan;
}

}  // namespace geowave
