// Explicit time integration: linear controlled systems, their duals, and the
// quasilinear equation with energy monitors.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geowave/operators.hpp"

namespace geowave {

enum class ControlKind { DirichletTrace, ConormalFlux };

inline const char* to_string(ControlKind k) { return k == ControlKind::DirichletTrace ? "dirichlet_trace" : "conormal_flux"; }

inline ControlKind control_kind(Action a) {
  return a == Action::Dirichlet ? ControlKind::DirichletTrace : ControlKind::ConormalFlux;
}

/// Uniform time levels t_n = n dt, n = 0..steps, with dt = T / steps.
struct TimeGrid {
  double T = 0.0;
  int steps = 0;
  double dt = 0.0;

  /// Fewest steps with dt <= dt_max.
  static TimeGrid make(double T, double dt_max) {
    require(T > 0.0 && std::isfinite(T), ErrorCode::InvalidArgument, "horizon T must be positive");
    require(dt_max > 0.0, ErrorCode::InvalidArgument, "time step bound must be positive");
    TimeGrid tg;
    tg.T = T;
    tg.steps = std::max(1, static_cast<int>(std::ceil(T / dt_max - 1e-12)));
    tg.dt = T / tg.steps;
    return tg;
  }
  static TimeGrid for_system(double T, double h, double lambda_max, double cfl = 0.5) {
    return make(T, cfl * h / std::sqrt(lambda_max));
  }
  double t(int n) const { return n * dt; }
  int levels() const { return steps + 1; }
};

struct WaveState {
  ScalarField u;
  ScalarField v;
  double t = 0.0;
};

/// Boundary control sampled on the time levels: row n holds the values at t_n
/// on `nodes` (grid indices of the controlled boundary).
struct ControlSignal {
  ControlKind kind = ControlKind::DirichletTrace;
  TimeGrid time;
  std::vector<int> nodes;
  Eigen::MatrixXd values;

  static ControlSignal zero(ControlKind kind, const TimeGrid& tg, const std::vector<int>& nodes) {
    ControlSignal c;
    c.kind = kind;
    c.time = tg;
    c.nodes = nodes;
    c.values = Eigen::MatrixXd::Zero(tg.levels(), static_cast<Eigen::Index>(nodes.size()));
    return c;
  }
  int m() const { return static_cast<int>(nodes.size()); }

  /// Piecewise-linear value at time t (clamped to [0, T]).
  Vec at(double t) const {
    const double s = std::clamp(t / time.dt, 0.0, static_cast<double>(time.steps));
    const int n = std::min(static_cast<int>(s), time.steps - 1);
    const double f = s - n;
    return (1.0 - f) * values.row(n).transpose() + f * values.row(n + 1).transpose();
  }
  void check() const {
    require(values.rows() == time.levels() && values.cols() == m(), ErrorCode::ShapeMismatch,
            "control values do not match the time grid and node list");
    require(values.allFinite(), ErrorCode::NonFinite, "control values are not finite");
  }
};

/// State on the unknowns of a linear system.
struct LinearState {
  Vec u;
  Vec v;

  static LinearState zero(int n) { return {Vec::Zero(n), Vec::Zero(n)}; }
};

namespace detail {

/// The linear step must satisfy dt <= 0.5 h / sqrt(max eigenvalue of A).
inline void check_cfl(const LinearWaveSystem& sys, const TimeGrid& tg) {
  const double limit = 0.5 * sys.grid.h / std::sqrt(sys.lambda_max);
  require(tg.dt <= limit * (1.0 + 1e-12), ErrorCode::CflViolation,
          "time step " + std::to_string(tg.dt) + " exceeds the stability bound " + std::to_string(limit));
}

inline void check_finite(const Vec& x, double t) {
  require(x.allFinite(), ErrorCode::NonFinite, "non-finite state at t = " + std::to_string(t));
}

}  // namespace detail

/// Velocity Verlet for u'' = K u + Kb g(t). Forward runs from level 0 to
/// level steps; backward runs start at level steps with step -dt and are the
/// exact inverse of the forward map. `g` has one row per time level (or no
/// rows for a zero control). Optionally records u at every level, in level order.
inline LinearState propagate(const LinearWaveSystem& sys, LinearState s, const Eigen::MatrixXd& g, const TimeGrid& tg,
                             bool backward = false, std::vector<Vec>* u_levels = nullptr) {
  const int n = sys.n();
  require(s.u.size() == n && s.v.size() == n, ErrorCode::ShapeMismatch, "state size does not match system");
  detail::check_cfl(sys, tg);
  const bool has_g = g.rows() > 0;
  if (has_g)
    require(g.rows() == tg.levels() && g.cols() == sys.m(), ErrorCode::ShapeMismatch,
            "control size does not match system and time grid");
  const double dt = backward ? -tg.dt : tg.dt;
  auto accel = [&](const Vec& u, int level) -> Vec {
    Vec a = sys.K * u;
    if (has_g) a += sys.Kb * g.row(level).transpose();
    return a;
  };
  if (u_levels) u_levels->assign(static_cast<std::size_t>(tg.levels()), Vec());
  int level = backward ? tg.steps : 0;
  if (u_levels) (*u_levels)[static_cast<std::size_t>(level)] = s.u;
  Vec a = accel(s.u, level);
  for (int step = 0; step < tg.steps; ++step) {
    const int next = backward ? level - 1 : level + 1;
    s.u += dt * s.v + (0.5 * dt * dt) * a;
    const Vec a_next = accel(s.u, next);
    s.v += (0.5 * dt) * (a + a_next);
    a = a_next;
    level = next;
    if (u_levels) (*u_levels)[static_cast<std::size_t>(level)] = s.u;
    if ((step & 63) == 63) detail::check_finite(s.u, tg.t(level));
  }
  detail::check_finite(s.u, tg.t(level));
  detail::check_finite(s.v, tg.t(level));
  return s;
}

/// Dual trajectory phi'' = K^+ phi with K^+ = M^{-1} K^T M, started from
/// (phi0, phi1), and its boundary trace tau_n = -(Kb^T M phi_n) / ell. For the
/// clamped action tau approximates the conormal derivative <A grad phi, nu>;
/// for the flux action it is -phi on the controlled boundary. The trace is the
/// exact adjoint of the backward control-to-state map.
struct DualRun {
  Eigen::MatrixXd trace;  // levels x controls
  std::vector<double> energy;
  LinearState final_state;
};

inline DualRun simulate_dual(const LinearWaveSystem& sys, const Vec& phi0, const Vec& phi1, const TimeGrid& tg,
                             bool record_energy = false, std::vector<Vec>* phi_levels = nullptr) {
  const int n = sys.n();
  require(phi0.size() == n && phi1.size() == n, ErrorCode::ShapeMismatch, "dual data size does not match system");
  detail::check_cfl(sys, tg);
  const Vec minv = sys.mass.cwiseInverse();
  const SpMat Kt = sys.K.transpose();
  auto kdag = [&](const Vec& p) -> Vec { return minv.cwiseProduct(Kt * sys.mass.cwiseProduct(p)); };
  const SpMat Kbt = sys.Kb.transpose();
  DualRun out;
  out.trace.resize(tg.levels(), sys.m());
  auto record = [&](int level, const Vec& p) {
    out.trace.row(level) = -(Kbt * sys.mass.cwiseProduct(p)).cwiseQuotient(sys.ell).transpose();
  };
  if (phi_levels) phi_levels->assign(static_cast<std::size_t>(tg.levels()), Vec());
  const double dt = tg.dt;
  Vec prev = phi0;
  Vec a = kdag(prev);
  Vec cur = phi0 + dt * phi1 + (0.5 * dt * dt) * a;
  Vec vel = phi1;
  record(0, prev);
  if (phi_levels) (*phi_levels)[0] = prev;
  if (record_energy) out.energy.push_back(linear_energy(sys, prev, vel));
  for (int level = 1; level <= tg.steps; ++level) {
    const Vec a_cur = kdag(cur);
    vel += (0.5 * dt) * (a + a_cur);
    record(level, cur);
    if (phi_levels) (*phi_levels)[static_cast<std::size_t>(level)] = cur;
    if (record_energy) out.energy.push_back(linear_energy(sys, cur, vel));
    if (level == tg.steps) break;
    Vec next = 2.0 * cur - prev + (dt * dt) * a_cur;
    prev = std::move(cur);
    cur = std::move(next);
    a = a_cur;
    if ((level & 63) == 63) detail::check_finite(cur, tg.t(level));
  }
  detail::check_finite(cur, tg.T);
  out.final_state = {cur, vel};
  return out;
}

/// Linear forward run from `init` at t = 0 under `control` (values per level).
inline LinearState simulate_forward(const LinearWaveSystem& sys, const LinearState& init, const ControlSignal& control,
                                    std::vector<Vec>* u_levels = nullptr) {
  control.check();
  require(control.kind == control_kind(sys.action), ErrorCode::InvalidArgument,
          "control kind does not match the boundary action");
  require(control.nodes == sys.dofs.control_nodes, ErrorCode::ShapeMismatch, "control nodes do not match system");
  return propagate(sys, init, control.values, control.time, false, u_levels);
}

/// Linear backward run from terminal data at t = T under `control`.
inline LinearState simulate_backward(const LinearWaveSystem& sys, const LinearState& terminal,
                                     const ControlSignal& control, std::vector<Vec>* u_levels = nullptr) {
  control.check();
  require(control.kind == control_kind(sys.action), ErrorCode::InvalidArgument,
          "control kind does not match the boundary action");
  require(control.nodes == sys.dofs.control_nodes, ErrorCode::ShapeMismatch, "control nodes do not match system");
  return propagate(sys, terminal, control.values, control.time, true, u_levels);
}

// ---------------------------------------------------------------------------
// Energy monitors

/// Weighted L2 and gradient norms over the domain nodes of one grid.
struct FieldNorms {
  const DomainGrid* g = nullptr;

  double l2(const ScalarField& f) const {
    double s = 0.0;
    for (int k : g->domain_nodes) s += f[k] * f[k];
    return g->h * g->h * s;
  }
  double grad2(const ScalarField& f) const { return q1::energy(*g, nullptr, f.v); }
  double grad2_A(const ScalarField& f, const std::vector<Sym2>& A) const { return q1::energy(*g, &A, f.v); }
  double hess2(const ScalarField& f) const {
    double s = 0.0;
    for (int k : g->interior_nodes) {
      const Sym2 H = centered_hessian(*g, f.v, g->col(k), g->row(k));
      s += H.xx * H.xx + 2.0 * H.xy * H.xy + H.yy * H.yy;
    }
    return g->h * g->h * s;
  }
  /// Boundary sum with weight h.
  double boundary(const ScalarField& f) const {
    double s = 0.0;
    for (int k : g->boundary_nodes) s += f[k] * f[k];
    return g->h * s;
  }
};

/// |A^{1/2} grad e|^2 + |e_t|^2 for full grid fields.
inline double field_energy(const DomainGrid& g, const std::vector<Sym2>& A, const ScalarField& e, const ScalarField& et) {
  FieldNorms nm{&g};
  return nm.grad2_A(e, A) + nm.l2(et);
}

struct EnergySample {
  double t = 0.0;
  double e_lin = 0.0;
  double q_surrogate = 0.0;
  double e_surrogate = 0.0;
  double e_gamma = 0.0;
  double q_gamma = 0.0;
};

struct EnergyTrace {
  std::vector<EnergySample> samples;

  bool monitor_holds() const {
    return std::all_of(samples.begin(), samples.end(),
                       [](const EnergySample& s) { return s.q_surrogate <= s.e_surrogate; });
  }
  double max_e_lin() const {
    double m = 0.0;
    for (const auto& s : samples) m = std::max(m, s.e_lin);
    return m;
  }
  /// Largest observed E_surrogate / Q_surrogate, an empirical stand-in for c_gamma.
  double max_ratio() const {
    double m = 0.0;
    for (const auto& s : samples)
      if (s.q_surrogate > 0.0) m = std::max(m, s.e_surrogate / s.q_surrogate);
    return m;
  }
};

// ---------------------------------------------------------------------------
// Quasilinear equation

struct QuasilinearOptions {
  double cfl = 0.4;
  double blowup_threshold = 1e12;
  /// Smallest admissible substep, relative to the control step.
  double dt_floor_fraction = 1e-4;
  bool record_energy = true;
  /// Record the energy every `energy_stride` control steps (and at the end).
  int energy_stride = 1;
};

struct QuasilinearResult {
  WaveState final_state;
  EnergyTrace energy;
  bool completed = false;
  bool blew_up = false;
  double blowup_time = std::numeric_limits<double>::quiet_NaN();
  std::string diagnostic;
  int substeps = 0;
  double max_lambda = 0.0;
};

namespace detail {

/// A(x, grad u) : D^2 u + b(x, grad u) at one interior node, centred differences.
inline double ql_accel(const CoefficientModel& model, const DomainGrid& g, const std::vector<double>& u, int k,
                       double& lam) {
  const int i = g.col(k), j = g.row(k);
  auto f = [&](int di, int dj) { return u[static_cast<std::size_t>(g.index(i + di, j + dj))]; };
  const double h = g.h, h2 = h * h;
  const Vec2 gr{(f(1, 0) - f(-1, 0)) / (2 * h), (f(0, 1) - f(0, -1)) / (2 * h)};
  const double uxx = (f(1, 0) - 2 * f(0, 0) + f(-1, 0)) / h2;
  const double uyy = (f(0, 1) - 2 * f(0, 0) + f(0, -1)) / h2;
  const double uxy = (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1)) / (4 * h2);
  const Vec2 x = g.pos(k);
  const Sym2 A = model.A(x, gr);
  lam = std::max(lam, A.max_eig());
  return A.xx * uxx + 2 * A.xy * uxy + A.yy * uyy + model.b(x, gr);
}

}  // namespace detail

/// Quasilinear wave equation with boundary control, velocity Verlet with the
/// substep refreshed from the current largest eigenvalue of A(x, grad u).
/// Clamped boundary nodes keep their initial values. For a clamped-trace
/// control the controlled boundary follows the signal; for a flux control the
/// model must be in divergence form and the cell flux-difference force is used.
/// Energies are measured against `reference` (an equilibrium) with A frozen there.
inline QuasilinearResult simulate_quasilinear(const CoefficientModel& model, const DomainGrid& g,
                                              const ControlSignal& control, const WaveState& init,
                                              const ScalarField& reference, const QuasilinearOptions& opt = {}) {
  control.check();
  check_shape(init.u, g);
  check_shape(init.v, g);
  check_shape(reference, g);
  const bool flux = control.kind == ControlKind::ConormalFlux;
  if (flux) {
    require(model.has_flux(), ErrorCode::InvalidArgument, "flux control needs a divergence-form model");
    require(!g.gamma1_nodes.empty(), ErrorCode::InvalidArgument, "flux action needs a nonempty clamped part");
  }
  const TimeGrid& tg = control.time;
  QuasilinearResult res;
  ScalarField u = init.u, v = init.v;

  // unknown nodes and their accelerations
  std::vector<int> unknowns;
  std::vector<double> qmass;
  std::vector<int> ctrl_of(static_cast<std::size_t>(g.size()), -1);
  for (int b = 0; b < control.m(); ++b) ctrl_of[static_cast<std::size_t>(control.nodes[static_cast<std::size_t>(b)])] = b;
  if (flux) {
    qmass = q1::lumped_mass(g);
    for (int k : g.domain_nodes)
      if (qmass[static_cast<std::size_t>(k)] > 0.0 && g.bclass[static_cast<std::size_t>(k)] != BoundaryClass::Gamma1)
        unknowns.push_back(k);
  } else {
    unknowns = g.interior_nodes;
    for (int k : control.nodes)
      require(g.bclass[static_cast<std::size_t>(k)] == BoundaryClass::Gamma0, ErrorCode::InvalidArgument,
              "trace control on a node outside the controlled boundary");
  }
  auto set_boundary = [&](ScalarField& f, const Vec& gv) {
    if (flux) return;
    for (int b = 0; b < control.m(); ++b) f[control.nodes[static_cast<std::size_t>(b)]] = gv[b];
  };
  auto accel = [&](const ScalarField& uu, const Vec& gv, std::vector<double>& a) {
    double lam = 0.0;
    a.assign(unknowns.size(), 0.0);
    if (flux) {
      const auto f = q1::internal_force(model, g, uu.v);
      for (std::size_t q = 0; q < unknowns.size(); ++q) {
        const int k = unknowns[q];
        double r = -f[static_cast<std::size_t>(k)];
        const int b = ctrl_of[static_cast<std::size_t>(k)];
        if (b >= 0) r += g.h * gv[b];
        a[q] = r / qmass[static_cast<std::size_t>(k)];
      }
      // spectral bound from A at the nodes
      const auto gu = gradient(uu, g);
      for (int k : g.domain_nodes) lam = std::max(lam, model.A(g.pos(k), gu.at(k)).max_eig());
    } else {
      for (std::size_t q = 0; q < unknowns.size(); ++q) a[q] = detail::ql_accel(model, g, uu.v, unknowns[q], lam);
    }
    return lam;
  };

  const std::vector<Sym2> A_ref = coefficient_field(model, reference, g);
  FieldNorms nm{&g};
  ScalarField v_prev_full = v;
  auto measure = [&](double t, const ScalarField& acc_field) {
    EnergySample s;
    s.t = t;
    const ScalarField e = axpy(-1.0, reference, u);
    s.e_lin = field_energy(g, A_ref, e, v);
    const double e0 = nm.l2(e), e1 = nm.grad2(e), e2 = nm.hess2(e);
    const double v0 = nm.l2(v), v1 = nm.grad2(v), a0 = nm.l2(acc_field);
    s.q_surrogate = v0 + e1 + a0 + v1;
    s.e_surrogate = e0 + e1 + e2 + v0 + v1 + a0;
    ScalarField en(g);
    const auto ge = gradient(e, g);
    for (int k : g.boundary_nodes) {
      const Vec2 nrm = g.normal[static_cast<std::size_t>(k)];
      en[k] = ge.at(k).dot(nrm);
    }
    s.q_gamma = nm.boundary(v) + nm.boundary(en);
    s.e_gamma = s.q_gamma + nm.boundary(e);
    for (double x : {s.e_lin, s.q_surrogate, s.e_surrogate, s.e_gamma, s.q_gamma})
      if (!std::isfinite(x) || x > opt.blowup_threshold) return false;
    res.energy.samples.push_back(s);
    return true;
  };

  Vec g0 = control.at(0.0);
  set_boundary(u, g0);
  std::vector<double> a, a_next;
  double lam = accel(u, g0, a);
  res.max_lambda = lam;
  ScalarField acc(g);
  for (std::size_t q = 0; q < unknowns.size(); ++q) acc[unknowns[q]] = a[q];
  if (opt.record_energy && !measure(0.0, acc)) {
    res.blew_up = true;
    res.blowup_time = 0.0;
    res.diagnostic = "initial energy above threshold";
    res.final_state = {u, v, 0.0};
    return res;
  }
  const double dt_floor = opt.dt_floor_fraction * tg.dt;
  double t = 0.0;
  for (int n = 0; n < tg.steps; ++n) {
    const double t_end = tg.t(n + 1);
    while (t < t_end - 1e-14 * tg.T) {
      double dt = std::min(t_end - t, opt.cfl * g.h / std::sqrt(std::max(lam, 1e-300)));
      if (dt < dt_floor) {
        res.diagnostic = "time step starvation at t = " + std::to_string(t) + " (largest eigenvalue " +
                         std::to_string(lam) + ")";
        res.blew_up = true;
        res.blowup_time = t;
        res.final_state = {u, v, t};
        return res;
      }
      // equal substeps up to the end of this control interval
      const int parts = static_cast<int>(std::ceil((t_end - t) / dt - 1e-12));
      dt = (t_end - t) / parts;
      const ScalarField u_old = u;
      for (std::size_t q = 0; q < unknowns.size(); ++q) {
        const int k = unknowns[q];
        u[k] += dt * v[k] + 0.5 * dt * dt * a[q];
      }
      const double t_new = (parts == 1) ? t_end : t + dt;
      const Vec gn = control.at(t_new);
      set_boundary(u, gn);
      lam = accel(u, gn, a_next);
      res.max_lambda = std::max(res.max_lambda, lam);
      for (std::size_t q = 0; q < unknowns.size(); ++q) v[unknowns[q]] += 0.5 * dt * (a[q] + a_next[q]);
      if (!flux)
        for (int k : control.nodes) v[k] = (u[k] - u_old[k]) / dt;
      std::swap(a, a_next);
      t = t_new;
      ++res.substeps;
      bool finite = true;
      for (int k : unknowns)
        if (!std::isfinite(u[k]) || !std::isfinite(v[k]) || std::abs(u[k]) > 1e150) finite = false;
      if (!finite) {
        res.blew_up = true;
        res.blowup_time = t;
        res.diagnostic = "solution lost finiteness at t = " + std::to_string(t);
        res.final_state = {u, v, t};
        return res;
      }
    }
    t = t_end;
    const bool sample_now = opt.record_energy && (((n + 1) % std::max(1, opt.energy_stride)) == 0 || n + 1 == tg.steps);
    if (sample_now) {
      for (std::size_t q = 0; q < unknowns.size(); ++q) acc[unknowns[q]] = a[q];
      if (!measure(t, acc)) {
        res.blew_up = true;
        res.blowup_time = t;
        res.diagnostic = "energy exceeded " + std::to_string(opt.blowup_threshold) + " at t = " + std::to_string(t);
        res.final_state = {u, v, t};
        return res;
      }
    }
  }
  res.completed = true;
  res.final_state = {u, v, tg.T};
  return res;
}

}  // namespace geowave
