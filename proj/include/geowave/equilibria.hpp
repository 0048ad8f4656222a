// Newton solver for stationary solutions and the boundary-scaled family w_alpha.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/SparseLU>

#include "geowave/operators.hpp"

namespace geowave {

struct EquilibriumOptions {
  double tol = 1e-9;
  int max_iters = 40;
  int max_halvings = 8;
};

struct EquilibriumSolution {
  ScalarField w;
  double residual = 0.0;
  int newton_iters = 0;
  bool converged = false;
  /// Values on boundary nodes, in grid.boundary_nodes order.
  std::vector<double> boundary_data;
};

inline std::vector<double> boundary_trace(const ScalarField& f, const DomainGrid& g) {
  std::vector<double> out;
  out.reserve(g.boundary_nodes.size());
  for (int k : g.boundary_nodes) out.push_back(f[k]);
  return out;
}

/// Newton iteration with step halving on the centred discrete equation at
/// interior nodes; boundary nodes keep the values of `boundary`.
inline EquilibriumSolution solve_equilibrium(const CoefficientModel& model, const ScalarField& boundary,
                                             const DomainGrid& g, const ScalarField* initial_guess = nullptr,
                                             const EquilibriumOptions& opt = {}) {
  check_shape(boundary, g);
  EquilibriumSolution sol;
  if (initial_guess) {
    sol.w = *initial_guess;
  } else {
    // harmonic extension of the data: one linear solve
    sol.w = boundary;
    for (int k : g.interior_nodes) sol.w[k] = 0.0;
    const auto lap = CoefficientModel::constant(Sym2::identity());
    const LinearWaveSystem lin = dirichlet_system(lap, sol.w, g);
    Eigen::SparseMatrix<double> J = lin.K;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(J);
    Vec ru(static_cast<Eigen::Index>(g.interior_nodes.size()));
    for (std::size_t a = 0; a < g.interior_nodes.size(); ++a) {
      const int k = g.interior_nodes[a];
      ru[static_cast<Eigen::Index>(a)] = linearize_at(lap, g, sol.w.v, g.col(k), g.row(k)).residual;
    }
    const Vec d = lu.solve(-ru);
    for (std::size_t a = 0; a < g.interior_nodes.size(); ++a) sol.w[g.interior_nodes[a]] += d[static_cast<Eigen::Index>(a)];
  }
  check_shape(sol.w, g);
  for (int k : g.boundary_nodes) sol.w[k] = boundary[k];
  for (int k = 0; k < g.size(); ++k)
    if (!g.is_domain(k)) sol.w[k] = 0.0;
  sol.boundary_data = boundary_trace(sol.w, g);

  const auto& nodes = g.interior_nodes;
  const int n = static_cast<int>(nodes.size());
  auto residual_vec = [&](const ScalarField& u, Vec& r) {
    r.resize(n);
    for (int a = 0; a < n; ++a) {
      const int k = nodes[static_cast<std::size_t>(a)];
      r[a] = scaled_residual(linearize_at(model, g, u.v, g.col(k), g.row(k)));
    }
  };
  Vec r;
  residual_vec(sol.w, r);
  double rn = r.lpNorm<Eigen::Infinity>();
  for (int it = 0; it < opt.max_iters && rn > opt.tol; ++it) {
    require(std::isfinite(rn), ErrorCode::NonFinite, "equilibrium residual is not finite");
    const LinearWaveSystem lin = dirichlet_system(model, sol.w, g);
    Eigen::SparseMatrix<double> J = lin.K;
    J.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(J);
    require(lu.info() == Eigen::Success, ErrorCode::NotConverged, "linearized equilibrium system is singular");
    // Newton direction for the unscaled residual
    Vec ru(n);
    for (int a = 0; a < n; ++a) {
      const int k = nodes[static_cast<std::size_t>(a)];
      ru[a] = linearize_at(model, g, sol.w.v, g.col(k), g.row(k)).residual;
    }
    const Vec delta = lu.solve(-ru);
    require(lu.info() == Eigen::Success, ErrorCode::NotConverged, "sparse solve failed");

    double step = 1.0;
    bool accepted = false;
    ScalarField trial = sol.w;
    Vec rt;
    for (int half = 0; half <= opt.max_halvings; ++half, step *= 0.5) {
      trial = sol.w;
      for (int a = 0; a < n; ++a) trial[nodes[static_cast<std::size_t>(a)]] += step * delta[a];
      residual_vec(trial, rt);
      const double rtn = rt.lpNorm<Eigen::Infinity>();
      if (std::isfinite(rtn) && rtn < rn) {
        accepted = true;
        break;
      }
    }
    sol.newton_iters = it + 1;
    if (!accepted) break;
    sol.w = trial;
    r = rt;
    rn = r.lpNorm<Eigen::Infinity>();
  }
  sol.residual = rn;
  sol.converged = rn <= opt.tol;
  return sol;
}

/// |w|_inf + |grad w|_inf + |D^2 w|_inf, a stand-in for a Sobolev bound.
inline double surrogate_norm(const ScalarField& w, const DomainGrid& g) {
  const auto gr = gradient(w, g);
  const auto hs = hessian(w, g);
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (int k : g.domain_nodes) {
    m0 = std::max(m0, std::abs(w[k]));
    m1 = std::max(m1, gr.at(k).norm());
  }
  for (int k : g.interior_nodes) {
    const Sym2& s = hs[static_cast<std::size_t>(k)];
    m2 = std::max({m2, std::abs(s.xx), std::abs(s.xy), std::abs(s.yy)});
  }
  return m0 + m1 + m2;
}

struct AlphaFamily {
  std::vector<double> alphas;
  std::vector<EquilibriumSolution> solutions;
  double max_norm_bound = 0.0;
  /// Largest max-norm difference of consecutive members.
  double step_bound = 0.0;
  int bisections = 0;
};

/// Equilibria with boundary data alpha * (trace of w_target), alpha = k / n_steps,
/// by continuation with warm starts; failing steps are bisected.
inline AlphaFamily alpha_family(const CoefficientModel& model, const EquilibriumSolution& target, const DomainGrid& g,
                                int n_steps, const EquilibriumOptions& opt = {}, double min_step = 1.0 / 1024.0) {
  require(n_steps >= 1, ErrorCode::InvalidArgument, "alpha family needs at least one step");
  check_shape(target.w, g);
  AlphaFamily fam;
  auto data_at = [&](double alpha) {
    ScalarField b(g);
    for (int k : g.boundary_nodes) b[k] = alpha * target.w[k];
    return b;
  };
  ScalarField current(g);
  double a_cur = 0.0;
  {
    auto s0 = solve_equilibrium(model, data_at(0.0), g, &current, opt);
    require(s0.converged, ErrorCode::NotConverged, "zero-data equilibrium did not converge");
    current = s0.w;
    fam.alphas.push_back(0.0);
    fam.solutions.push_back(std::move(s0));
  }
  for (int k = 1; k <= n_steps; ++k) {
    const double a_target = static_cast<double>(k) / n_steps;
    double step = a_target - a_cur;
    while (a_cur < a_target - 1e-15) {
      const double a_next = std::min(a_target, a_cur + step);
      auto s = solve_equilibrium(model, data_at(a_next), g, &current, opt);
      if (!s.converged) {
        step *= 0.5;
        ++fam.bisections;
        require(step >= min_step, ErrorCode::NotConverged,
                "alpha continuation failed near alpha = " + std::to_string(a_cur));
        continue;
      }
      current = s.w;
      a_cur = a_next;
      if (std::abs(a_cur - a_target) <= 1e-15) {
        a_cur = a_target;
        fam.alphas.push_back(a_target);
        fam.solutions.push_back(std::move(s));
      }
    }
  }
  for (std::size_t i = 0; i < fam.solutions.size(); ++i) {
    fam.max_norm_bound = std::max(fam.max_norm_bound, surrogate_norm(fam.solutions[i].w, g));
    if (i > 0) {
      const auto d = axpy(-1.0, fam.solutions[i - 1].w, fam.solutions[i].w);
      fam.step_bound = std::max(fam.step_bound, max_abs(g, d));
    }
  }
  return fam;
}

}  // namespace geowave
