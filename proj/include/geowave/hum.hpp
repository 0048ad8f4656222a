// Hilbert uniqueness method: Gram operators for both boundary actions,
// Krylov inversion, null-control synthesis and observability sampling.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <memory>
#include <vector>

#include <Eigen/SparseCholesky>

#include "geowave/geometry.hpp"
#include "geowave/wavesim.hpp"

namespace geowave {

/// 1 on (-inf, 0], 0 on [1, inf), quintic smoothstep in between.
inline double smooth_drop(double s) {
  if (s <= 0.0) return 1.0;
  if (s >= 1.0) return 0.0;
  return 1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
}

/// z(t) = 1 up to the knee, 0 from T on.
inline double cutoff(double t, double knee, double T) { return smooth_drop((t - knee) / (T - knee)); }

enum class KrylovMethod { ConjugateResidual, ConjugateGradient };

inline const char* to_string(KrylovMethod m) { return m == KrylovMethod::ConjugateResidual ? "cr" : "cg"; }

struct HumOptions {
  Action action = Action::Dirichlet;
  double T = 3.0;
  double cfl = 0.5;
  /// Control time from the geometry check; sets the knee of z for the clamped action.
  std::optional<double> T0;
  /// Width of the cutoff ramp for the flux action, as a fraction of T.
  double eps_fraction = 0.1;
  double c_T = 1.0;
  /// Base point of the distance function used for h0 (flux action); defaults to the grid centre.
  std::optional<Vec2> x0;
  DistanceOptions distance;
};

struct KrylovOptions {
  KrylovMethod method = KrylovMethod::ConjugateResidual;
  double tol = 1e-8;
  int max_iters = 500;
  int stagnation_window = 100;
  double stagnation_factor = 0.9;
  /// Iterate in the energy inner product with the stiffness as Riesz map.
  bool precondition = true;
};

struct KrylovResult {
  Vec x;
  std::vector<double> residual_history;  // relative, starting with 1
  int iterations = 0;
  bool converged = false;
  bool stagnated = false;
  std::string diagnostic;
};

using LinearMap = std::function<Vec(const Vec&)>;
using InnerProduct = std::function<double(const Vec&, const Vec&)>;

/// Conjugate residual or conjugate gradients for a self-adjoint map in the
/// inner product `dot`. Conjugate residual minimizes the residual over the
/// Krylov space, so its residual history never increases.
inline KrylovResult krylov_solve(const LinearMap& A, const Vec& b, const InnerProduct& dot, const KrylovOptions& opt) {
  KrylovResult res;
  res.x = Vec::Zero(b.size());
  const double bnorm = std::sqrt(dot(b, b));
  res.residual_history.push_back(1.0);
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }
  Vec r = b;
  Vec p = r;
  auto check_stagnation = [&]() {
    const int k = static_cast<int>(res.residual_history.size()) - 1;
    if (k >= opt.stagnation_window &&
        res.residual_history[static_cast<std::size_t>(k)] >=
            opt.stagnation_factor * res.residual_history[static_cast<std::size_t>(k - opt.stagnation_window)]) {
      res.stagnated = true;
      res.diagnostic = "residual plateau over " + std::to_string(opt.stagnation_window) + " iterations";
    }
  };
  if (opt.method == KrylovMethod::ConjugateResidual) {
    Vec Ar = A(r);
    Vec Ap = Ar;
    double rAr = dot(r, Ar);
    while (res.iterations < opt.max_iters) {
      const double ApAp = dot(Ap, Ap);
      if (!(ApAp > 0.0) || rAr == 0.0) {
        res.diagnostic = "breakdown: operator annihilates the search direction";
        res.stagnated = true;
        break;
      }
      const double alpha = rAr / ApAp;
      res.x += alpha * p;
      r -= alpha * Ap;
      ++res.iterations;
      const double rel = std::sqrt(dot(r, r)) / bnorm;
      res.residual_history.push_back(rel);
      if (rel <= opt.tol) {
        res.converged = true;
        break;
      }
      check_stagnation();
      if (res.stagnated) break;
      Ar = A(r);
      const double rAr_new = dot(r, Ar);
      const double beta = rAr_new / rAr;
      rAr = rAr_new;
      p = r + beta * p;
      Ap = Ar + beta * Ap;
    }
  } else {
    double rr = dot(r, r);
    while (res.iterations < opt.max_iters) {
      const Vec Ap = A(p);
      const double pAp = dot(p, Ap);
      if (!(pAp > 0.0)) {
        res.diagnostic = "breakdown: operator is not positive on the search direction";
        res.stagnated = true;
        break;
      }
      const double alpha = rr / pAp;
      res.x += alpha * p;
      r -= alpha * Ap;
      ++res.iterations;
      const double rr_new = dot(r, r);
      const double rel = std::sqrt(rr_new) / bnorm;
      res.residual_history.push_back(rel);
      if (rel <= opt.tol) {
        res.converged = true;
        break;
      }
      check_stagnation();
      if (res.stagnated) break;
      p = r + (rr_new / rr) * p;
      rr = rr_new;
    }
  }
  if (!res.converged && !res.stagnated) {
    res.stagnated = true;
    res.diagnostic = "iteration limit " + std::to_string(opt.max_iters) + " reached";
  }
  return res;
}

/// The Gram operator Lambda (phi0, phi1) = (psi_t(0), -psi(0)) of one
/// linearized system, horizon and cutoff. States are stacked (first, second)
/// vectors on the unknowns with the mass-weighted inner product in each block.
class HumOperator {
 public:
  HumOperator(const CoefficientModel& model, const ScalarField& w, const DomainGrid& grid, const HumOptions& opt)
      : opt_(opt), sys_(make_system(opt.action, model, w, grid)) {
    require(opt.T > 0.0, ErrorCode::InvalidArgument, "horizon T must be positive");
    tg_ = TimeGrid::for_system(opt.T, grid.h, sys_.lambda_max, opt.cfl);
    if (opt.action == Action::Dirichlet) {
      knee_ = (opt.T0 && *opt.T0 < opt.T) ? std::max(*opt.T0, 0.8 * opt.T) : 0.8 * opt.T;
    } else {
      require(opt.eps_fraction > 0.0 && opt.eps_fraction < 1.0, ErrorCode::InvalidArgument,
              "cutoff width must lie in (0, 1)");
      knee_ = opt.T - opt.eps_fraction * opt.T;
    }
    const int L = tg_.levels();
    z_.resize(L);
    theta_.resize(L);
    for (int n = 0; n < L; ++n) {
      z_[n] = cutoff(tg_.t(n), knee_, opt.T);
      theta_[n] = (n == 0 || n == tg_.steps) ? 0.5 : 1.0;
    }
    zhalf_.resize(tg_.steps);
    for (int n = 0; n < tg_.steps; ++n) zhalf_[n] = cutoff((n + 0.5) * tg_.dt, knee_, opt.T);
    if (opt.action == Action::Neumann) setup_flux_law(model, w, grid);
    setup_riesz();
  }

  const LinearWaveSystem& system() const { return sys_; }
  const TimeGrid& time() const { return tg_; }
  const HumOptions& options() const { return opt_; }
  double knee() const { return knee_; }
  const Vec& z() const { return z_; }
  int n() const { return sys_.n(); }
  int dim() const { return 2 * sys_.n(); }
  /// Flux action: h0 on the control nodes and the constant lambda_T.
  const Vec& h0() const { return h0_; }
  double lambda_T() const { return lambda_T_; }
  double c_T() const { return opt_.c_T; }

  Vec stack(const Vec& a, const Vec& b) const {
    Vec x(dim());
    x << a, b;
    return x;
  }
  Vec first(const Vec& x) const { return x.head(n()); }
  Vec second(const Vec& x) const { return x.tail(n()); }

  double dot(const Vec& x, const Vec& y) const {
    return sys_.dot(x.head(n()), y.head(n())) + sys_.dot(x.tail(n()), y.tail(n()));
  }

  /// Energy inner product x1^T S y1 + x2^T M y2 on dual data.
  double energy_dot(const Vec& x, const Vec& y) const {
    return x.head(n()).dot(riesz_S_ * y.head(n())) + sys_.dot(x.tail(n()), y.tail(n()));
  }
  /// Inverse Riesz map of the energy inner product: M^{-1}-dual residual to dual data.
  Vec riesz_inverse(const Vec& r) const {
    Vec out(dim());
    out.head(n()) = riesz_->solve(sys_.mass.cwiseProduct(r.head(n())));
    out.tail(n()) = r.tail(n());
    return out;
  }

  /// Trace of the dual solution started at (phi0, phi1).
  Eigen::MatrixXd trace(const Vec& x) const {
    return simulate_dual(sys_, first(x), second(x), tg_).trace;
  }

  /// Control produced by a dual trace: z tau (clamped action) or the
  /// symmetric flux law (flux action).
  Eigen::MatrixXd control_from_trace(const Eigen::MatrixXd& tau) const {
    if (opt_.action == Action::Dirichlet) return z_.asDiagonal() * tau;
    return q_apply(tau, lambda_T_).cwiseQuotient(weights());
  }

  ControlSignal control_signal(const Eigen::MatrixXd& values) const {
    ControlSignal c;
    c.kind = control_kind(opt_.action);
    c.time = tg_;
    c.nodes = sys_.dofs.control_nodes;
    c.values = values;
    return c;
  }

  /// Quadrature weights theta_n dt ell_b of the control inner product.
  Eigen::MatrixXd weights() const { return (tg_.dt * theta_) * sys_.ell.transpose(); }

  /// The control-space bilinear form whose value at (tau, tau) is <Lambda x, x>.
  double form(const Eigen::MatrixXd& tau, const Eigen::MatrixXd& sigma) const {
    if (opt_.action == Action::Dirichlet) return (weights().cwiseProduct(z_.asDiagonal() * tau)).cwiseProduct(sigma).sum();
    return q_apply(tau, lambda_T_).cwiseProduct(sigma).sum();
  }

  /// Psi on boundary traces: the time-derivative and tangential terms.
  double psi(const Eigen::MatrixXd& tau, const Eigen::MatrixXd& sigma) const {
    require(opt_.action == Action::Neumann, ErrorCode::InvalidArgument, "Psi is defined for the flux action");
    return q_apply(tau, 0.0).cwiseProduct(sigma).sum();
  }
  /// Psi plus c_T times the z-weighted product.
  double psi_star(const Eigen::MatrixXd& tau, const Eigen::MatrixXd& sigma) const {
    require(opt_.action == Action::Neumann, ErrorCode::InvalidArgument, "Psi is defined for the flux action");
    return q_apply(tau, opt_.c_T).cwiseProduct(sigma).sum();
  }

  /// Backward run from rest at T under control g: (psi(0), psi_t(0)).
  LinearState backward_from_rest(const Eigen::MatrixXd& g) const {
    return propagate(sys_, LinearState::zero(n()), g, tg_, true);
  }

  Vec apply(const Vec& x) const {
    require(x.size() == dim(), ErrorCode::ShapeMismatch, "Gram operator argument has the wrong size");
    const LinearState psi0 = backward_from_rest(control_from_trace(trace(x)));
    return stack(psi0.v, -psi0.u);
  }

  /// <Lambda x, x> through the trace alone.
  double gram(const Vec& x) const {
    const auto tau = trace(x);
    return form(tau, tau);
  }

  /// Sum of tau^2 over the controlled boundary and [0, T], no cutoff.
  double boundary_observation(const Eigen::MatrixXd& tau) const {
    return weights().cwiseProduct(tau).cwiseProduct(tau).sum();
  }

 private:
  struct BoundaryEdge {
    int b = 0, c = 0;  // control indices
    double len = 0.0, len_g = 0.0, h0 = 0.0;
  };

  /// Matrix of the flux-law form applied to tau, with coefficient `lam` on the zero-order term.
  Eigen::MatrixXd q_apply(const Eigen::MatrixXd& tau, double lam) const {
    const int L = tg_.levels();
    const double dt = tg_.dt;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(L, sys_.m());
    for (int k = 0; k < tg_.steps; ++k) {
      const Eigen::RowVectorXd d = (tau.row(k + 1) - tau.row(k)) / dt;
      const Eigen::RowVectorXd wgt = (zhalf_[k] * dt) * sys_.ell.cwiseProduct(h0_).transpose();
      const Eigen::RowVectorXd f = wgt.cwiseProduct(d) / dt;
      out.row(k + 1) += f;
      out.row(k) -= f;
    }
    for (int k = 0; k < L; ++k) {
      const double s = theta_[k] * dt * z_[k];
      if (s == 0.0) continue;
      for (const auto& e : edges_) {
        const double c = s * e.len * e.h0 / (e.len_g * e.len_g);
        const double diff = tau(k, e.c) - tau(k, e.b);
        out(k, e.c) -= c * diff;
        out(k, e.b) += c * diff;
      }
      if (lam != 0.0) out.row(k) += (lam * s) * sys_.ell.transpose().cwiseProduct(tau.row(k));
    }
    return out;
  }

  /// Stiffness used as Riesz map: the assembled one for the flux action, the
  /// five-point Laplacian scaled by the mean of A for the clamped action.
  void setup_riesz() {
    if (sys_.action == Action::Neumann) {
      riesz_S_ = sys_.S;
    } else {
      const DomainGrid& g = sys_.grid;
      double c = 0.0;
      for (int k : g.domain_nodes) c += 0.5 * sys_.A_node[static_cast<std::size_t>(k)].trace();
      c /= static_cast<double>(g.domain_nodes.size());
      std::vector<Eigen::Triplet<double>> ts;
      for (int a = 0; a < n(); ++a) {
        const int k = sys_.dofs.unknown_nodes[static_cast<std::size_t>(a)];
        const int i = g.col(k), j = g.row(k);
        ts.emplace_back(a, a, 4.0 * c);
        for (auto [di, dj] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
          const int b = sys_.dofs.unk_of[static_cast<std::size_t>(g.index(i + di, j + dj))];
          if (b >= 0) ts.emplace_back(a, b, -c);
        }
      }
      riesz_S_.resize(n(), n());
      riesz_S_.setFromTriplets(ts.begin(), ts.end());
    }
    Eigen::SparseMatrix<double> S = riesz_S_;
    riesz_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(S);
    require(riesz_->info() == Eigen::Success, ErrorCode::NotSpd, "stiffness used as Riesz map is not positive definite");
  }

  void setup_flux_law(const CoefficientModel& model, const ScalarField& w, const DomainGrid& g) {
    const MetricField metric = build_metric(model, w, g);
    const Vec2 base = opt_.x0 ? *opt_.x0 : g.geometric_center();
    const int x0 = g.nearest_domain_node(base);
    const DistanceResult dist = distance_field(metric, x0, g, opt_.distance);
    rho_ = dist.rho;
    const int m = sys_.m();
    h0_.resize(m);
    for (int b = 0; b < m; ++b) {
      const int k = sys_.dofs.control_nodes[static_cast<std::size_t>(b)];
      const int i = g.col(k), j = g.row(k);
      const Vec2 gr{first_derivative(g, rho_.v, i, j, 0), first_derivative(g, rho_.v, i, j, 1)};
      const Vec2 H = (2.0 * rho_[k]) * metric.A[static_cast<std::size_t>(k)].apply(gr);
      h0_[b] = H.dot(g.normal[static_cast<std::size_t>(k)]);
    }
    auto metric_len = [&](int ka, int kb) {
      const Vec2 t = g.pos(kb) - g.pos(ka);
      return 0.5 * (std::sqrt(metric.g[static_cast<std::size_t>(ka)].quad(t)) +
                    std::sqrt(metric.g[static_cast<std::size_t>(kb)].quad(t)));
    };
    double sup_lap = 0.0;
    for (const auto& run : gamma0_runs(g)) {
      std::vector<int> idx;  // control indices along the run
      for (int k : run.nodes) {
        const int b = sys_.dofs.ctrl_of[static_cast<std::size_t>(k)];
        if (b >= 0) idx.push_back(b);
      }
      const int r = static_cast<int>(idx.size());
      const int n_edges = run.cyclic ? r : r - 1;
      for (int e = 0; e < n_edges && r >= 2; ++e) {
        const int b = idx[static_cast<std::size_t>(e)], c = idx[static_cast<std::size_t>((e + 1) % r)];
        const int kb = sys_.dofs.control_nodes[static_cast<std::size_t>(b)];
        const int kc = sys_.dofs.control_nodes[static_cast<std::size_t>(c)];
        edges_.push_back({b, c, (g.pos(kc) - g.pos(kb)).norm(), metric_len(kb, kc), 0.5 * (h0_[b] + h0_[c])});
      }
      // tangential Laplacian of h0 away from run ends and corners
      for (int q = 0; q < r; ++q) {
        if (!run.cyclic && (q == 0 || q == r - 1)) continue;
        const int p = idx[static_cast<std::size_t>((q + r - 1) % r)], b = idx[static_cast<std::size_t>(q)],
                  c = idx[static_cast<std::size_t>((q + 1) % r)];
        const int kp = sys_.dofs.control_nodes[static_cast<std::size_t>(p)];
        const int kb = sys_.dofs.control_nodes[static_cast<std::size_t>(b)];
        const int kc = sys_.dofs.control_nodes[static_cast<std::size_t>(c)];
        const Vec2 np = g.normal[static_cast<std::size_t>(kp)], nc = g.normal[static_cast<std::size_t>(kc)];
        if (np.dot(nc) < std::cos(kPi / 6.0)) continue;
        const double l1 = metric_len(kp, kb), l2 = metric_len(kb, kc);
        const double lap = 2.0 / (l1 + l2) * ((h0_[c] - h0_[b]) / l2 - (h0_[b] - h0_[p]) / l1);
        sup_lap = std::max(sup_lap, std::abs(lap));
      }
    }
    lambda_T_ = opt_.c_T + 0.5 * sup_lap;
  }

  HumOptions opt_;
  LinearWaveSystem sys_;
  TimeGrid tg_;
  double knee_ = 0.0;
  Vec z_, theta_, zhalf_;
  Vec h0_;
  ScalarField rho_;
  std::vector<BoundaryEdge> edges_;
  double lambda_T_ = 0.0;
  SpMat riesz_S_;
  std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> riesz_;
};

/// Solve Lambda x = b, preconditioned by the energy Riesz map when requested.
inline KrylovResult solve_gram(const HumOperator& op, const Vec& b, const KrylovOptions& kopt) {
  if (!kopt.precondition)
    return krylov_solve([&](const Vec& x) { return op.apply(x); }, b,
                        [&](const Vec& x, const Vec& y) { return op.dot(x, y); }, kopt);
  return krylov_solve([&](const Vec& x) { return op.riesz_inverse(op.apply(x)); }, op.riesz_inverse(b),
                      [&](const Vec& x, const Vec& y) { return op.energy_dot(x, y); }, kopt);
}

struct HumSolveResult {
  Vec phi0;
  Vec phi1;
  ControlSignal control;
  std::vector<double> residual_history;
  int iterations = 0;
  bool converged = false;
  bool stagnated = false;
  std::string diagnostic;
  double initial_energy = 0.0;
  /// Energy of the independent forward run at T.
  double terminal_energy = 0.0;
  double gram_value = 0.0;
  LinearState terminal;
};

/// Solve Lambda x = (v1, -v0) and synthesize the control that brings (v0, v1)
/// to rest at T; the claim is checked by a separate forward run.
inline HumSolveResult solve_null_control(const HumOperator& op, const Vec& v0, const Vec& v1,
                                         const KrylovOptions& kopt = {}) {
  const LinearWaveSystem& sys = op.system();
  require(v0.size() == op.n() && v1.size() == op.n(), ErrorCode::ShapeMismatch, "target size does not match system");
  HumSolveResult out;
  const Vec b = op.stack(v1, -v0);
  const auto kr = solve_gram(op, b, kopt);
  out.phi0 = op.first(kr.x);
  out.phi1 = op.second(kr.x);
  out.residual_history = kr.residual_history;
  out.iterations = kr.iterations;
  out.converged = kr.converged;
  out.stagnated = kr.stagnated;
  out.diagnostic = kr.diagnostic;
  const auto tau = op.trace(kr.x);
  out.control = op.control_signal(op.control_from_trace(tau));
  out.gram_value = op.form(tau, tau);
  out.initial_energy = linear_energy(sys, v0, v1);
  out.terminal = simulate_forward(sys, {v0, v1}, out.control);
  out.terminal_energy = linear_energy(sys, out.terminal.u, out.terminal.v);
  return out;
}

// ---------------------------------------------------------------------------
// Observability sampling

/// Gaussian noise smoothed by a separable 5-point binomial kernel applied
/// `passes` times, restricted to the unknowns of `sys`.
inline Vec smooth_random_field(const LinearWaveSystem& sys, std::mt19937_64& rng, int passes = 4) {
  const DomainGrid& g = sys.grid;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> f(static_cast<std::size_t>(g.size()), 0.0);
  for (int k : g.domain_nodes) f[static_cast<std::size_t>(k)] = normal(rng);
  const double w[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  std::vector<double> tmp(f.size());
  for (int p = 0; p < passes; ++p)
    for (int axis = 0; axis < 2; ++axis) {
      std::fill(tmp.begin(), tmp.end(), 0.0);
      for (int k : g.domain_nodes) {
        const int i = g.col(k), j = g.row(k);
        double s = 0.0, ws = 0.0;
        for (int d = -2; d <= 2; ++d) {
          const int ii = axis == 0 ? i + d : i, jj = axis == 0 ? j : j + d;
          if (!g.in_domain(ii, jj)) continue;
          s += w[d + 2] * f[static_cast<std::size_t>(g.index(ii, jj))];
          ws += w[d + 2];
        }
        tmp[static_cast<std::size_t>(k)] = s / ws;
      }
      f.swap(tmp);
    }
  ScalarField sf(g);
  sf.v = f;
  return sys.gather(sf);
}

struct ProbeResult {
  double c1_hat = 0.0;
  double c2_hat = 0.0;
  std::vector<double> values;
  /// Psi_* on each sample (flux action only).
  std::vector<double> psi_star;
  std::optional<double> adversarial_value;
};

/// Boundary observation of normalized dual data (E = 1): random smooth samples
/// plus, optionally, a narrow bump at the grid centre.
inline ProbeResult observability_probe(const HumOperator& op, int n_samples, std::uint64_t seed,
                                       bool adversarial = true) {
  require(n_samples >= 10, ErrorCode::InvalidArgument, "observability probe needs at least 10 samples");
  const LinearWaveSystem& sys = op.system();
  std::mt19937_64 rng(seed);
  ProbeResult out;
  auto evaluate = [&](Vec a, Vec b) {
    const double e = linear_energy(sys, a, b);
    require(e > 0.0, ErrorCode::InvalidArgument, "probe sample has zero energy");
    a /= std::sqrt(e);
    b /= std::sqrt(e);
    const auto tau = simulate_dual(sys, a, b, op.time()).trace;
    if (sys.action == Action::Neumann) out.psi_star.push_back(op.psi_star(tau, tau));
    return op.boundary_observation(tau);
  };
  for (int s = 0; s < n_samples; ++s) {
    Vec a = smooth_random_field(sys, rng);
    Vec b = smooth_random_field(sys, rng);
    out.values.push_back(evaluate(a, b));
  }
  if (adversarial) {
    const DomainGrid& g = sys.grid;
    const Vec2 c = g.geometric_center();
    const double width = 0.04;
    const ScalarField bump = sample(g, [&](Vec2 p) { return std::exp(-(p - c).norm2() / (2 * width * width)); });
    const double v = evaluate(sys.gather(bump), Vec::Zero(sys.n()));
    out.adversarial_value = v;
    out.values.push_back(v);
  }
  out.c1_hat = *std::min_element(out.values.begin(), out.values.end());
  out.c2_hat = *std::max_element(out.values.begin(), out.values.end());
  return out;
}

}  // namespace geowave
