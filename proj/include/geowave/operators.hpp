// Discrete spatial operators: the nonlinear residual, its exact linearization,
// and the assembled linear wave systems for the Dirichlet and flux actions.
#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Sparse>

#include "geowave/coefficients.hpp"
#include "geowave/grid.hpp"

namespace geowave {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

enum class Action { Dirichlet, Neumann };

inline const char* to_string(Action a) { return a == Action::Dirichlet ? "dirichlet" : "neumann"; }

/// Weights of a 3x3 stencil, indexed by (di, dj) in {-1, 0, 1}^2.
struct Stencil9 {
  std::array<double, 9> c{};
  double& at(int di, int dj) { return c[static_cast<std::size_t>((dj + 1) * 3 + (di + 1))]; }
  double at(int di, int dj) const { return c[static_cast<std::size_t>((dj + 1) * 3 + (di + 1))]; }
};

/// Stencil of v -> sum a_ij v_ij + F . grad v with centred differences.
inline Stencil9 linear_stencil(const Sym2& a, Vec2 f, double h) {
  Stencil9 s;
  const double h2 = h * h;
  s.at(1, 0) += a.xx / h2 + f.x / (2.0 * h);
  s.at(-1, 0) += a.xx / h2 - f.x / (2.0 * h);
  s.at(0, 1) += a.yy / h2 + f.y / (2.0 * h);
  s.at(0, -1) += a.yy / h2 - f.y / (2.0 * h);
  s.at(0, 0) += -2.0 * (a.xx + a.yy) / h2;
  const double m = a.xy / (2.0 * h2);
  s.at(1, 1) += m;
  s.at(-1, -1) += m;
  s.at(1, -1) -= m;
  s.at(-1, 1) -= m;
  return s;
}

/// Residual and linearization of sum a_ij(x, grad u) u_ij + b(x, grad u) at one node.
struct NodeLinearization {
  Sym2 A;
  Vec2 F;
  Vec2 grad;
  Sym2 hess;
  double residual = 0.0;
};

inline NodeLinearization linearize_at(const CoefficientModel& model, const DomainGrid& g,
                                      const std::vector<double>& u, int i, int j) {
  auto v = [&](int di, int dj) { return u[static_cast<std::size_t>(g.index(i + di, j + dj))]; };
  const double h = g.h;
  const double h2 = h * h;
  NodeLinearization r;
  r.grad = {(v(1, 0) - v(-1, 0)) / (2.0 * h), (v(0, 1) - v(0, -1)) / (2.0 * h)};
  r.hess = {(v(1, 0) - 2.0 * v(0, 0) + v(-1, 0)) / h2,
            (v(1, 1) - v(1, -1) - v(-1, 1) + v(-1, -1)) / (4.0 * h2),
            (v(0, 1) - 2.0 * v(0, 0) + v(0, -1)) / h2};
  const Vec2 x = g.pos(i, j);
  r.A = model.A(x, r.grad);
  const auto dA = model.dA(x, r.grad);
  const Vec2 db = model.db(x, r.grad);
  auto contract = [&](const Sym2& m) { return m.xx * r.hess.xx + 2.0 * m.xy * r.hess.xy + m.yy * r.hess.yy; };
  r.F = {contract(dA[0]) + db.x, contract(dA[1]) + db.y};
  r.residual = contract(r.A) + model.b(x, r.grad);
  return r;
}

/// Residual divided by the mean eigenvalue of A, so that degenerate growth of
/// A cannot make a wrong iterate look converged.
inline double scaled_residual(const NodeLinearization& lin) { return lin.residual / (0.5 * lin.A.trace()); }

/// Scaled residual of the equilibrium equation at interior nodes (zero elsewhere).
inline ScalarField residual_field(const CoefficientModel& model, const ScalarField& u, const DomainGrid& g) {
  check_shape(u, g);
  ScalarField r(g);
  for (int k : g.interior_nodes) r[k] = scaled_residual(linearize_at(model, g, u.v, g.col(k), g.row(k)));
  return r;
}

inline double residual_norm(const CoefficientModel& model, const ScalarField& u, const DomainGrid& g) {
  return max_abs(g, residual_field(model, u, g));
}

/// Unknown / control numbering of grid nodes for one boundary action.
struct DofMap {
  std::vector<int> unknown_nodes;
  std::vector<int> control_nodes;
  std::vector<int> unk_of;   // node -> unknown index or -1
  std::vector<int> ctrl_of;  // node -> control column or -1

  int n() const { return static_cast<int>(unknown_nodes.size()); }
  int m() const { return static_cast<int>(control_nodes.size()); }
};

/// Linear system u'' = K u + Kb g on the unknowns, with state weights `mass`
/// (discrete L2 inner product) and control lengths `ell` per control node.
struct LinearWaveSystem {
  Action action = Action::Dirichlet;
  DomainGrid grid;
  DofMap dofs;
  SpMat K;
  SpMat Kb;
  SpMat S;  // stiffness (flux action only)
  Vec mass;
  Vec ell;
  std::vector<Sym2> A_node;  // A(x, grad w) per grid node
  double lambda_max = 1.0;

  int n() const { return dofs.n(); }
  int m() const { return dofs.m(); }

  Vec gather(const ScalarField& f) const {
    Vec out(n());
    for (int a = 0; a < n(); ++a) out[a] = f[dofs.unknown_nodes[static_cast<std::size_t>(a)]];
    return out;
  }
  /// Full grid field from unknowns; boundary nodes set from `boundary` (control
  /// values on control nodes) or zero.
  ScalarField scatter(const Vec& u, const Vec* boundary = nullptr) const {
    ScalarField f(grid);
    for (int a = 0; a < n(); ++a) f[dofs.unknown_nodes[static_cast<std::size_t>(a)]] = u[a];
    if (boundary && action == Action::Dirichlet)
      for (int b = 0; b < m(); ++b) f[dofs.control_nodes[static_cast<std::size_t>(b)]] = (*boundary)[b];
    return f;
  }
  double dot(const Vec& a, const Vec& b) const { return (mass.array() * a.array() * b.array()).sum(); }
};

inline DofMap make_dofs(const DomainGrid& g, const std::vector<int>& unknown_nodes,
                        const std::vector<int>& control_nodes) {
  DofMap d;
  d.unknown_nodes = unknown_nodes;
  d.control_nodes = control_nodes;
  d.unk_of.assign(static_cast<std::size_t>(g.size()), -1);
  d.ctrl_of.assign(static_cast<std::size_t>(g.size()), -1);
  for (int a = 0; a < d.n(); ++a) d.unk_of[static_cast<std::size_t>(unknown_nodes[static_cast<std::size_t>(a)])] = a;
  for (int b = 0; b < d.m(); ++b) d.ctrl_of[static_cast<std::size_t>(control_nodes[static_cast<std::size_t>(b)])] = b;
  return d;
}

/// Per-node A(x, grad w) with the domain-aware gradient.
inline std::vector<Sym2> coefficient_field(const CoefficientModel& model, const ScalarField& w, const DomainGrid& g) {
  const auto gw = gradient(w, g);
  std::vector<Sym2> out(static_cast<std::size_t>(g.size()), Sym2::identity());
  for (int k : g.domain_nodes) {
    out[static_cast<std::size_t>(k)] = model.A(g.pos(k), gw.at(k));
    require(out[static_cast<std::size_t>(k)].min_eig() > 0.0, ErrorCode::NotSpd,
            "A(x, grad w) is not positive definite at node " + std::to_string(k));
  }
  return out;
}

/// Exact linearization of the centred residual at w, split into interior
/// unknowns (K) and controlled boundary values (Kb). Clamped nodes carry zero.
inline LinearWaveSystem dirichlet_system(const CoefficientModel& model, const ScalarField& w, const DomainGrid& g) {
  check_shape(w, g);
  LinearWaveSystem sys;
  sys.action = Action::Dirichlet;
  sys.grid = g;
  sys.dofs = make_dofs(g, g.interior_nodes, g.gamma0_nodes);
  sys.A_node = coefficient_field(model, w, g);
  const int n = sys.n();
  std::vector<Eigen::Triplet<double>> tk, tb;
  tk.reserve(static_cast<std::size_t>(9 * n));
  double lmax = 0.0;
  for (int a = 0; a < n; ++a) {
    const int k = sys.dofs.unknown_nodes[static_cast<std::size_t>(a)];
    const int i = g.col(k), j = g.row(k);
    const auto lin = linearize_at(model, g, w.v, i, j);
    require(lin.A.min_eig() > 0.0, ErrorCode::NotSpd, "A(x, grad w) is not positive definite");
    sys.A_node[static_cast<std::size_t>(k)] = lin.A;
    lmax = std::max(lmax, lin.A.max_eig());
    const Stencil9 st = linear_stencil(lin.A, lin.F, g.h);
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        const double c = st.at(di, dj);
        if (c == 0.0) continue;
        const int kk = g.index(i + di, j + dj);
        const int col = sys.dofs.unk_of[static_cast<std::size_t>(kk)];
        if (col >= 0) {
          tk.emplace_back(a, col, c);
        } else {
          const int b = sys.dofs.ctrl_of[static_cast<std::size_t>(kk)];
          if (b >= 0) tb.emplace_back(a, b, c);
        }
      }
  }
  for (int k : g.domain_nodes) lmax = std::max(lmax, sys.A_node[static_cast<std::size_t>(k)].max_eig());
  sys.lambda_max = lmax;
  sys.K.resize(n, n);
  sys.K.setFromTriplets(tk.begin(), tk.end());
  sys.Kb.resize(n, sys.m());
  sys.Kb.setFromTriplets(tb.begin(), tb.end());
  sys.mass = Vec::Constant(n, g.h * g.h);
  sys.ell = Vec::Constant(sys.m(), g.h);
  return sys;
}

namespace q1 {

/// Cells whose four corners are domain nodes, identified by their lower-left node.
inline std::vector<int> elements(const DomainGrid& g) {
  std::vector<int> out;
  for (int j = 0; j + 1 < g.ny; ++j)
    for (int i = 0; i + 1 < g.nx; ++i)
      if (g.in_domain(i, j) && g.in_domain(i + 1, j) && g.in_domain(i + 1, j + 1) && g.in_domain(i, j + 1))
        out.push_back(g.index(i, j));
  return out;
}

inline std::array<int, 4> corners(const DomainGrid& g, int e) {
  const int i = g.col(e), j = g.row(e);
  return {g.index(i, j), g.index(i + 1, j), g.index(i + 1, j + 1), g.index(i, j + 1)};
}

struct QuadPoint {
  double xi, eta;
  std::array<Vec2, 4> dN;  // physical gradients of the bilinear shape functions
};

/// Vertex quadrature: at each cell corner the gradient uses the two cell edges
/// meeting there, so the stiffness is the five-point flux-difference operator
/// (with its mixed term) and carries no spurious slow checkerboard mode.
inline std::array<QuadPoint, 4> quad_points(double h) {
  const double pts[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  std::array<QuadPoint, 4> out{};
  for (int q = 0; q < 4; ++q) {
    const double xi = pts[q][0], eta = pts[q][1];
    QuadPoint& qp = out[static_cast<std::size_t>(q)];
    qp.xi = xi;
    qp.eta = eta;
    qp.dN = {Vec2{-(1 - eta) / h, -(1 - xi) / h}, Vec2{(1 - eta) / h, -xi / h}, Vec2{eta / h, xi / h},
             Vec2{-eta / h, (1 - xi) / h}};
  }
  return out;
}

inline Vec2 grad_at(const std::array<int, 4>& c, const QuadPoint& gp, const std::vector<double>& u) {
  Vec2 gr{};
  for (int a = 0; a < 4; ++a) gr = gr + u[static_cast<std::size_t>(c[static_cast<std::size_t>(a)])] * gp.dN[static_cast<std::size_t>(a)];
  return gr;
}

inline Vec2 point_at(const DomainGrid& g, int e, const QuadPoint& gp) {
  const Vec2 p = g.pos(e);
  return {p.x + gp.xi * g.h, p.y + gp.eta * g.h};
}

/// Lumped mass per grid node.
inline std::vector<double> lumped_mass(const DomainGrid& g) {
  std::vector<double> m(static_cast<std::size_t>(g.size()), 0.0);
  const double q = 0.25 * g.h * g.h;
  for (int e : elements(g))
    for (int k : corners(g, e)) m[static_cast<std::size_t>(k)] += q;
  return m;
}

/// Vertex-quadrature energy sum_cells sum_q w_q A(corner) grad u . grad u,
/// with A given per grid node; for A = I it is the five-point Dirichlet form.
inline double energy(const DomainGrid& g, const std::vector<Sym2>* A, const std::vector<double>& u) {
  const auto gps = quad_points(g.h);
  const double wq = 0.25 * g.h * g.h;
  double e = 0.0;
  for (int el : elements(g)) {
    const auto c = corners(g, el);
    for (std::size_t q = 0; q < 4; ++q) {
      const Vec2 gr = grad_at(c, gps[q], u);
      e += wq * (A ? (*A)[static_cast<std::size_t>(c[q])].quad(gr) : gr.norm2());
    }
  }
  return e;
}

/// Internal force f_a = sum_q w_q a(x_q, grad u_q) . grad N_a for a flux model.
inline std::vector<double> internal_force(const CoefficientModel& model, const DomainGrid& g, const std::vector<double>& u) {
  std::vector<double> f(static_cast<std::size_t>(g.size()), 0.0);
  const auto gps = quad_points(g.h);
  const double wq = 0.25 * g.h * g.h;
  for (int e : elements(g)) {
    const auto c = corners(g, e);
    for (const auto& gp : gps) {
      const Vec2 flux = model.flux(point_at(g, e, gp), grad_at(c, gp, u));
      for (int a = 0; a < 4; ++a) f[static_cast<std::size_t>(c[static_cast<std::size_t>(a)])] += wq * flux.dot(gp.dN[static_cast<std::size_t>(a)]);
    }
  }
  return f;
}

}  // namespace q1

/// Flux differencing on the cells with lumped (control-volume) mass:
/// M u'' = -S u + B g on the nodes not clamped, with the flux g applied on
/// the controlled boundary.
inline LinearWaveSystem neumann_system(const CoefficientModel& model, const ScalarField& w, const DomainGrid& g) {
  check_shape(w, g);
  require(!g.gamma1_nodes.empty(), ErrorCode::InvalidArgument, "flux action needs a nonempty clamped part");
  LinearWaveSystem sys;
  sys.action = Action::Neumann;
  sys.grid = g;
  const auto mass = q1::lumped_mass(g);
  std::vector<int> unknowns, controls;
  for (int k : g.domain_nodes) {
    if (mass[static_cast<std::size_t>(k)] <= 0.0 || g.bclass[static_cast<std::size_t>(k)] == BoundaryClass::Gamma1) continue;
    unknowns.push_back(k);
    if (g.bclass[static_cast<std::size_t>(k)] == BoundaryClass::Gamma0) controls.push_back(k);
  }
  sys.dofs = make_dofs(g, unknowns, controls);
  const int n = sys.n();
  sys.A_node = coefficient_field(model, w, g);

  const auto gps = q1::quad_points(g.h);
  const double wq = 0.25 * g.h * g.h;
  std::vector<Eigen::Triplet<double>> ts;
  double lmax = 0.0;
  for (int e : q1::elements(g)) {
    const auto c = q1::corners(g, e);
    for (const auto& gp : gps) {
      const Sym2 A = model.A(q1::point_at(g, e, gp), q1::grad_at(c, gp, w.v));
      require(A.min_eig() > 0.0, ErrorCode::NotSpd, "A(x, grad w) is not positive definite");
      lmax = std::max(lmax, A.max_eig());
      for (int a = 0; a < 4; ++a) {
        const int ra = sys.dofs.unk_of[static_cast<std::size_t>(c[static_cast<std::size_t>(a)])];
        if (ra < 0) continue;
        const Vec2 Ag = A.apply(gp.dN[static_cast<std::size_t>(a)]);
        for (int b = 0; b < 4; ++b) {
          const int cb = sys.dofs.unk_of[static_cast<std::size_t>(c[static_cast<std::size_t>(b)])];
          if (cb < 0) continue;
          ts.emplace_back(ra, cb, wq * Ag.dot(gp.dN[static_cast<std::size_t>(b)]));
        }
      }
    }
  }
  sys.lambda_max = lmax;
  sys.S.resize(n, n);
  sys.S.setFromTriplets(ts.begin(), ts.end());
  sys.mass.resize(n);
  for (int a = 0; a < n; ++a) sys.mass[a] = mass[static_cast<std::size_t>(unknowns[static_cast<std::size_t>(a)])];
  sys.ell = Vec::Constant(sys.m(), g.h);

  std::vector<Eigen::Triplet<double>> tk, tb;
  for (int r = 0; r < sys.S.outerSize(); ++r)
    for (SpMat::InnerIterator it(sys.S, r); it; ++it) tk.emplace_back(r, it.col(), -it.value() / sys.mass[r]);
  for (int b = 0; b < sys.m(); ++b) {
    const int a = sys.dofs.unk_of[static_cast<std::size_t>(controls[static_cast<std::size_t>(b)])];
    tb.emplace_back(a, b, sys.ell[b] / sys.mass[a]);
  }
  sys.K.resize(n, n);
  sys.K.setFromTriplets(tk.begin(), tk.end());
  sys.Kb.resize(n, sys.m());
  sys.Kb.setFromTriplets(tb.begin(), tb.end());
  return sys;
}

inline LinearWaveSystem make_system(Action action, const CoefficientModel& model, const ScalarField& w,
                                    const DomainGrid& g) {
  return action == Action::Dirichlet ? dirichlet_system(model, w, g) : neumann_system(model, w, g);
}

/// E = |A^{1/2} grad u|^2 + |v|^2. Grid quadrature for the Dirichlet action,
/// the assembled stiffness and mass for the flux action.
inline double linear_energy(const LinearWaveSystem& sys, const Vec& u, const Vec& v) {
  if (sys.action == Action::Neumann) return u.dot(sys.S * u) + sys.dot(v, v);
  const ScalarField f = sys.scatter(u);
  return q1::energy(sys.grid, &sys.A_node, f.v) + sys.dot(v, v);
}

}  // namespace geowave
