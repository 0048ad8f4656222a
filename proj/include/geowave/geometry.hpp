// Riemannian metric g = A^{-1}(x, grad w): curvature, distance, convexity
// constant, control time and the curvature/convexity verdict.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "geowave/equilibria.hpp"
#include "geowave/operators.hpp"

namespace geowave {

struct MetricField {
  std::vector<Sym2> g;
  std::vector<Sym2> A;
  /// christoffel[k][m] holds Gamma^m_{ij} as a symmetric matrix in (i, j).
  std::vector<std::array<Sym2, 2>> christoffel;
};

inline MetricField build_metric(const CoefficientModel& model, const ScalarField& w, const DomainGrid& grid) {
  check_shape(w, grid);
  MetricField m;
  m.A = coefficient_field(model, w, grid);
  const std::size_t n = static_cast<std::size_t>(grid.size());
  m.g.assign(n, Sym2::identity());
  for (int k : grid.domain_nodes) m.g[static_cast<std::size_t>(k)] = m.A[static_cast<std::size_t>(k)].inverse();

  std::vector<double> gxx(n, 0.0), gxy(n, 0.0), gyy(n, 0.0);
  for (int k : grid.domain_nodes) {
    gxx[static_cast<std::size_t>(k)] = m.g[static_cast<std::size_t>(k)].xx;
    gxy[static_cast<std::size_t>(k)] = m.g[static_cast<std::size_t>(k)].xy;
    gyy[static_cast<std::size_t>(k)] = m.g[static_cast<std::size_t>(k)].yy;
  }
  m.christoffel.assign(n, {Sym2{0, 0, 0}, Sym2{0, 0, 0}});
  for (int k : grid.domain_nodes) {
    const int i = grid.col(k), j = grid.row(k);
    // dg[l](a, b) = d g_ab / d x_l
    std::array<Sym2, 2> dg;
    for (int l = 0; l < 2; ++l)
      dg[static_cast<std::size_t>(l)] = {first_derivative(grid, gxx, i, j, l), first_derivative(grid, gxy, i, j, l),
                                         first_derivative(grid, gyy, i, j, l)};
    const Sym2& ginv = m.A[static_cast<std::size_t>(k)];
    auto first_kind = [&](int a, int b, int l) {
      // [ab, l] = 1/2 (d_a g_bl + d_b g_al - d_l g_ab)
      return 0.5 * (dg[static_cast<std::size_t>(a)](b, l) + dg[static_cast<std::size_t>(b)](a, l) -
                    dg[static_cast<std::size_t>(l)](a, b));
    };
    for (int mm = 0; mm < 2; ++mm) {
      auto second_kind = [&](int a, int b) {
        return ginv(mm, 0) * first_kind(a, b, 0) + ginv(mm, 1) * first_kind(a, b, 1);
      };
      m.christoffel[static_cast<std::size_t>(k)][static_cast<std::size_t>(mm)] = {second_kind(0, 0), second_kind(0, 1),
                                                                                  second_kind(1, 1)};
    }
  }
  return m;
}

/// True when the node and its eight neighbours are all interior nodes.
inline bool interior_ring(const DomainGrid& g, int k) {
  const int i = g.col(k), j = g.row(k);
  for (int dj = -1; dj <= 1; ++dj)
    for (int di = -1; di <= 1; ++di)
      if (!g.is_interior(i + di, j + dj)) return false;
  return true;
}

struct CurvatureResult {
  ScalarField k;  // NaN where the stencil is unavailable
  double kappa = 0.0;
  int valid_nodes = 0;
};

/// Gauss curvature from the Brioschi formula with centred differences of g.
inline CurvatureResult gauss_curvature(const MetricField& metric, const DomainGrid& grid) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CurvatureResult out;
  out.k = ScalarField(grid, nan);
  out.kappa = -std::numeric_limits<double>::infinity();
  const double h = grid.h;
  for (int k : grid.interior_nodes) {
    if (!interior_ring(grid, k)) continue;
    const int i = grid.col(k), j = grid.row(k);
    auto at = [&](int di, int dj) -> const Sym2& {
      return metric.g[static_cast<std::size_t>(grid.index(i + di, j + dj))];
    };
    auto du = [&](double Sym2::*c) { return (at(1, 0).*c - at(-1, 0).*c) / (2 * h); };
    auto dv = [&](double Sym2::*c) { return (at(0, 1).*c - at(0, -1).*c) / (2 * h); };
    auto duu = [&](double Sym2::*c) { return (at(1, 0).*c - 2 * at(0, 0).*c + at(-1, 0).*c) / (h * h); };
    auto dvv = [&](double Sym2::*c) { return (at(0, 1).*c - 2 * at(0, 0).*c + at(0, -1).*c) / (h * h); };
    auto duv = [&](double Sym2::*c) {
      return (at(1, 1).*c - at(1, -1).*c - at(-1, 1).*c + at(-1, -1).*c) / (4 * h * h);
    };
    const double E = at(0, 0).xx, F = at(0, 0).xy, G = at(0, 0).yy;
    const double Eu = du(&Sym2::xx), Ev = dv(&Sym2::xx), Fu = du(&Sym2::xy), Fv = dv(&Sym2::xy);
    const double Gu = du(&Sym2::yy), Gv = dv(&Sym2::yy);
    const double Evv = dvv(&Sym2::xx), Guu = duu(&Sym2::yy), Fuv = duv(&Sym2::xy);
    auto det3 = [](const double m[3][3]) {
      return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
             m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    };
    const double m1[3][3] = {{-0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * Eu, Fu - 0.5 * Ev},
                             {Fv - 0.5 * Gu, E, F},
                             {0.5 * Gv, F, G}};
    const double m2[3][3] = {{0.0, 0.5 * Ev, 0.5 * Gu}, {0.5 * Ev, E, F}, {0.5 * Gu, F, G}};
    const double d = E * G - F * F;
    const double kk = (det3(m1) - det3(m2)) / (d * d);
    out.k[k] = kk;
    out.kappa = std::max(out.kappa, kk);
    ++out.valid_nodes;
  }
  require(out.valid_nodes > 0, ErrorCode::InvalidArgument, "grid too coarse for curvature stencils");
  return out;
}

struct DistanceOptions {
  double tol = 1e-11;
  int max_sweeps = 4000;
};

struct DistanceResult {
  ScalarField rho;
  int sweeps = 0;
  double last_change = 0.0;
  bool converged = false;
};

/// Factored Lax-Friedrichs fast sweeping for sqrt(<A grad rho, grad rho>) = 1,
/// rho(x0) = 0. rho = rho_f + tau with rho_f the exact distance of the frozen
/// metric g(x0); tau solves the corrected equation.
inline DistanceResult distance_field(const MetricField& metric, int x0, const DomainGrid& grid,
                                     const DistanceOptions& opt = {}) {
  require(x0 >= 0 && x0 < grid.size() && grid.is_domain(x0), ErrorCode::InvalidArgument,
          "base point must be a domain node");
  const std::size_t n = static_cast<std::size_t>(grid.size());
  const double h = grid.h;
  const Vec2 p0 = grid.pos(x0);
  const Sym2 g0 = metric.g[static_cast<std::size_t>(x0)];
  std::vector<double> rf(n, 0.0);
  std::vector<Vec2> grf(n, Vec2{});
  for (int k : grid.domain_nodes) {
    const Vec2 d = grid.pos(k) - p0;
    rf[static_cast<std::size_t>(k)] = std::sqrt(std::max(0.0, g0.quad(d)));
    if (k != x0) grf[static_cast<std::size_t>(k)] = (1.0 / rf[static_cast<std::size_t>(k)]) * g0.apply(d);
  }

  // Nodes with all four axis neighbours are updated by the scheme, the rest by
  // linear extrapolation from inside.
  std::vector<std::uint8_t> lf(n, 0);
  for (int k : grid.domain_nodes) {
    const int i = grid.col(k), j = grid.row(k);
    lf[static_cast<std::size_t>(k)] = grid.in_domain(i + 1, j) && grid.in_domain(i - 1, j) &&
                                      grid.in_domain(i, j + 1) && grid.in_domain(i, j - 1);
  }
  std::vector<double> tau(n, 0.0);
  auto T = [&](int i, int j) { return tau[static_cast<std::size_t>(grid.index(i, j))]; };

  auto update_lf = [&](int k) {
    const int i = grid.col(k), j = grid.row(k);
    const Sym2& A = metric.A[static_cast<std::size_t>(k)];
    const double sx = std::sqrt(A.xx), sy = std::sqrt(A.yy);
    const double tE = T(i + 1, j), tW = T(i - 1, j), tN = T(i, j + 1), tS = T(i, j - 1);
    const Vec2 p = grf[static_cast<std::size_t>(k)] + Vec2{(tE - tW) / (2 * h), (tN - tS) / (2 * h)};
    const double H = std::sqrt(std::max(0.0, A.quad(p)));
    return (1.0 - H + sx * (tE + tW) / (2 * h) + sy * (tN + tS) / (2 * h)) / (sx / h + sy / h);
  };
  auto update_edge = [&](int k) {
    const int i = grid.col(k), j = grid.row(k);
    double sum = 0.0;
    int cnt = 0;
    const int dirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (const auto& d : dirs) {
      // missing neighbour on side -d, extrapolate from side +d
      if (grid.in_domain(i - d[0], j - d[1])) continue;
      if (grid.in_domain(i + d[0], j + d[1]) && grid.in_domain(i + 2 * d[0], j + 2 * d[1])) {
        sum += 2.0 * T(i + d[0], j + d[1]) - T(i + 2 * d[0], j + 2 * d[1]);
        ++cnt;
      }
    }
    if (cnt == 0) {
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di)
          if ((di || dj) && grid.in_domain(i + di, j + dj)) {
            sum += T(i + di, j + dj);
            ++cnt;
          }
    }
    return cnt ? sum / cnt : 0.0;
  };

  DistanceResult res;
  const int nx = grid.nx, ny = grid.ny;
  for (int s = 0; s < opt.max_sweeps; ++s) {
    const int dir = s % 4;
    const bool rx = dir == 1 || dir == 2;
    const bool ry = dir >= 2;
    double change = 0.0;
    for (int jj = 0; jj < ny; ++jj) {
      const int j = ry ? ny - 1 - jj : jj;
      for (int ii = 0; ii < nx; ++ii) {
        const int i = rx ? nx - 1 - ii : ii;
        const int k = grid.index(i, j);
        if (!grid.is_domain(k) || k == x0) continue;
        const double nv = lf[static_cast<std::size_t>(k)] ? update_lf(k) : update_edge(k);
        change = std::max(change, std::abs(nv - tau[static_cast<std::size_t>(k)]));
        tau[static_cast<std::size_t>(k)] = nv;
      }
    }
    res.sweeps = s + 1;
    res.last_change = change;
    require(std::isfinite(change), ErrorCode::NonFinite, "distance sweeping produced non-finite values");
    if (change < opt.tol && s >= 3) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged)
    throw Error(ErrorCode::NotConverged,
                "distance sweeping did not converge, last change " + std::to_string(res.last_change));
  res.rho = ScalarField(grid);
  for (int k : grid.domain_nodes)
    res.rho[k] = std::max(0.0, rf[static_cast<std::size_t>(k)] + tau[static_cast<std::size_t>(k)]);
  return res;
}

struct ConvexityResult {
  double rho0 = std::numeric_limits<double>::quiet_NaN();
  ScalarField worst_eig;  // NaN at excluded nodes
  int included = 0;
  int excluded = 0;
  double excluded_fraction = 0.0;
  bool warn_excluded = false;
};

/// rho0 = min over nodes of the smallest eigenvalue of D^2_g(rho^2) relative to g.
inline ConvexityResult convexity_constant(const MetricField& metric, const ScalarField& rho, const DomainGrid& grid) {
  check_shape(rho, grid);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  ConvexityResult out;
  out.worst_eig = ScalarField(grid, nan);
  std::vector<double> p(static_cast<std::size_t>(grid.size()), 0.0);
  for (int k : grid.domain_nodes) p[static_cast<std::size_t>(k)] = rho[k] * rho[k];
  double best = std::numeric_limits<double>::infinity();
  for (int k : grid.domain_nodes) {
    if (!interior_ring(grid, k)) {
      ++out.excluded;
      continue;
    }
    const int i = grid.col(k), j = grid.row(k);
    const Sym2 H = centered_hessian(grid, p, i, j);
    const Vec2 dp{first_derivative(grid, p, i, j, 0), first_derivative(grid, p, i, j, 1)};
    const auto& gam = metric.christoffel[static_cast<std::size_t>(k)];
    const Sym2 D = H - (dp.x * gam[0] + dp.y * gam[1]);
    const double e = min_generalized_eig(D, metric.g[static_cast<std::size_t>(k)]);
    out.worst_eig[k] = e;
    best = std::min(best, e);
    ++out.included;
  }
  require(out.included > 0, ErrorCode::InvalidArgument, "no node admits the convexity stencil");
  out.rho0 = best;
  out.excluded_fraction = static_cast<double>(out.excluded) / static_cast<double>(grid.domain_nodes.size());
  out.warn_excluded = out.excluded_fraction > 0.10;
  return out;
}

enum class CenterMode { Barycenter, Search, Explicit };

struct GeometryOptions {
  CenterMode center_mode = CenterMode::Barycenter;
  Vec2 center{0.0, 0.0};
  int search_per_axis = 7;
  double residual_tol = 1e-6;
  double kappa_tol = 1e-8;
  /// Allowed positive part of the normal derivative of rho on the clamped part;
  /// negative means 2h.
  double sign_tol = -1.0;
  int directions = 64;
  DistanceOptions distance;
};

struct ControllabilityReport {
  double kappa = 0.0;
  double lambda = 0.0;
  double rho0 = 0.0;
  double sup_rho = 0.0;
  std::optional<double> T0;
  Vec2 center;
  int center_node = -1;
  std::optional<double> ball_radius;
  double domain_radius = 0.0;  // sup |x - shape centre| over the closed domain
  double residual = 0.0;
  double max_gamma1_normal_derivative = 0.0;
  bool kappa_nonpositive = false;
  bool ball_criterion = false;
  bool hessian_criterion = false;
  bool gamma1_sign_condition = true;
  bool controllable = false;
  int excluded_nodes = 0;
  double excluded_fraction = 0.0;
  int sweeps = 0;
  std::vector<std::string> warnings;
  ScalarField worst_eig;
  ScalarField curvature;
  ScalarField rho;
};

inline Vec2 metric_barycenter(const MetricField& m, const DomainGrid& g) {
  double wsum = 0.0;
  Vec2 c{};
  for (int k : g.domain_nodes) {
    const double wt = std::sqrt(m.g[static_cast<std::size_t>(k)].det());
    wsum += wt;
    c = c + wt * g.pos(k);
  }
  return (1.0 / wsum) * c;
}

inline double min_speed(const MetricField& m, const DomainGrid& g, int directions) {
  double lam = std::numeric_limits<double>::infinity();
  for (int k : g.domain_nodes)
    for (int d = 0; d < directions; ++d) {
      const double th = 2.0 * kPi * d / directions;
      lam = std::min(lam, std::sqrt(m.A[static_cast<std::size_t>(k)].quad({std::cos(th), std::sin(th)})));
    }
  return lam;
}

/// Curvature, ball, convexity and sign checks for one equilibrium.
inline ControllabilityReport proposition_1_1(const CoefficientModel& model, const ScalarField& w, const DomainGrid& grid,
                                             const GeometryOptions& opt = {}) {
  check_shape(w, grid);
  ControllabilityReport rep;
  rep.residual = residual_norm(model, w, grid);
  require(rep.residual <= opt.residual_tol, ErrorCode::InvalidArgument,
          "equilibrium residual " + std::to_string(rep.residual) + " exceeds tolerance");
  const MetricField metric = build_metric(model, w, grid);
  const auto curv = gauss_curvature(metric, grid);
  rep.curvature = curv.k;
  rep.kappa = curv.kappa;
  rep.lambda = min_speed(metric, grid, opt.directions);
  rep.kappa_nonpositive = rep.kappa <= opt.kappa_tol;
  rep.domain_radius = grid.max_distance_from(grid.geometric_center());
  if (rep.kappa > 0.0) {
    rep.ball_radius = rep.lambda * kPi / (2.0 * std::sqrt(rep.kappa));
    rep.ball_criterion = rep.domain_radius < *rep.ball_radius;
  }

  std::vector<int> candidates;
  switch (opt.center_mode) {
    case CenterMode::Explicit:
      candidates.push_back(grid.nearest_domain_node(opt.center));
      break;
    case CenterMode::Barycenter:
      candidates.push_back(grid.nearest_domain_node(metric_barycenter(metric, grid)));
      break;
    case CenterMode::Search: {
      candidates.push_back(grid.nearest_domain_node(metric_barycenter(metric, grid)));
      const int s = std::max(2, opt.search_per_axis);
      for (int a = 0; a < s; ++a)
        for (int b = 0; b < s; ++b) {
          const int i = static_cast<int>(std::lround((grid.nx - 1) * (a + 0.5) / s));
          const int j = static_cast<int>(std::lround((grid.ny - 1) * (b + 0.5) / s));
          if (grid.in_domain(i, j)) candidates.push_back(grid.index(i, j));
        }
      break;
    }
  }
  bool first = true;
  for (int c : candidates) {
    auto dist = distance_field(metric, c, grid, opt.distance);
    auto conv = convexity_constant(metric, dist.rho, grid);
    if (!first && !(conv.rho0 > rep.rho0)) continue;
    first = false;
    rep.center_node = c;
    rep.center = grid.pos(c);
    rep.rho0 = conv.rho0;
    rep.worst_eig = conv.worst_eig;
    rep.excluded_nodes = conv.excluded;
    rep.excluded_fraction = conv.excluded_fraction;
    rep.sweeps = dist.sweeps;
    rep.rho = dist.rho;
  }
  rep.sup_rho = max_abs(grid, rep.rho);
  rep.hessian_criterion = rep.rho0 > 0.0;
  if (rep.hessian_criterion) rep.T0 = 4.0 / rep.rho0 * rep.sup_rho;
  if (rep.excluded_fraction > 0.10)
    rep.warnings.push_back("convexity stencil excluded " + std::to_string(rep.excluded_nodes) + " nodes (" +
                           std::to_string(100.0 * rep.excluded_fraction) + "%)");

  const double sign_tol = opt.sign_tol >= 0.0 ? opt.sign_tol : 2.0 * grid.h;
  rep.max_gamma1_normal_derivative = -std::numeric_limits<double>::infinity();
  for (int k : grid.gamma1_nodes) {
    if (k == rep.center_node) continue;
    const int i = grid.col(k), j = grid.row(k);
    const Vec2 gr{first_derivative(grid, rep.rho.v, i, j, 0), first_derivative(grid, rep.rho.v, i, j, 1)};
    rep.max_gamma1_normal_derivative =
        std::max(rep.max_gamma1_normal_derivative, gr.dot(grid.normal[static_cast<std::size_t>(k)]));
  }
  if (grid.gamma1_nodes.empty()) rep.max_gamma1_normal_derivative = 0.0;
  rep.gamma1_sign_condition = rep.max_gamma1_normal_derivative <= sign_tol;
  rep.controllable =
      (rep.kappa_nonpositive || rep.ball_criterion || rep.hessian_criterion) && rep.gamma1_sign_condition;
  if (!rep.hessian_criterion) rep.warnings.push_back("convexity constant is not positive; control time undefined");
  return rep;
}

}  // namespace geowave
