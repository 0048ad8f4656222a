#include <gtest/gtest.h>

#include <cmath>

#include "geowave/equilibria.hpp"

using namespace geowave;

namespace {

ScalarField quad(const DomainGrid& g, double a) {
  return sample(g, [a](Vec2 p) { return a * (p.x * p.x - p.y * p.y); });
}

/// Polynomial model whose source b(x, y) = -r(x) y1 makes w* a stationary
/// solution, with r = sum a_ij(x, grad w*) w*_ij and d w*/dx1 = 1.
CoefficientModel manufactured_model(bool cubic) {
  Poly4 a11{{{1.0, 0, 0, 0, 0}, {0.5, 2, 0, 0, 0}, {1.0, 0, 0, 2, 0}}};
  Poly4 a22{{{1.0, 0, 0, 0, 0}, {1.0, 0, 0, 2, 0}, {1.0, 0, 0, 0, 2}}};
  Poly4 b;
  if (!cubic) {
    // w* = x1 + x2^2/2: grad = (1, x2), w*_22 = 1, r = a22 = 2 + x2^2
    b.terms = {{-2.0, 0, 0, 1, 0}, {-1.0, 0, 2, 1, 0}};
  } else {
    // w* = x1 + x2^3/6: grad = (1, x2^2/2), w*_22 = x2, r = (2 + x2^4/4) x2
    b.terms = {{-2.0, 0, 1, 1, 0}, {-0.25, 0, 5, 1, 0}};
  }
  return CoefficientModel::poly(a11, {}, a22, b);
}

double manufactured_error(double h, bool cubic) {
  auto g = build_grid(GridSpec::unit_square(h));
  auto exact = sample(g, [cubic](Vec2 p) { return cubic ? p.x + p.y * p.y * p.y / 6 : p.x + 0.5 * p.y * p.y; });
  auto sol = solve_equilibrium(manufactured_model(cubic), exact, g);
  EXPECT_TRUE(sol.converged);
  return max_abs(g, axpy(-1.0, exact, sol.w));
}

}  // namespace

TEST(Equilibrium, HarmonicQuadraticIsExact) {
  auto g = build_grid(GridSpec::unit_disc(1.0 / 32));
  auto target = quad(g, 0.3);
  ScalarField start(g);
  auto sol = solve_equilibrium(CoefficientModel::iso_plus(), target, g, &start);
  EXPECT_TRUE(sol.converged);
  EXPECT_LE(sol.residual, 1e-9);
  EXPECT_LE(max_abs(g, axpy(-1.0, target, sol.w)), 1e-9);
}

TEST(Equilibrium, ZeroDataGivesZero) {
  auto g = build_grid(GridSpec::unit_square(1.0 / 16));
  auto sol = solve_equilibrium(CoefficientModel::iso_inv(), ScalarField(g), g);
  EXPECT_TRUE(sol.converged);
  EXPECT_EQ(max_abs(g, sol.w), 0.0);
}

TEST(Equilibrium, ManufacturedRecovery) {
  EXPECT_LE(manufactured_error(1.0 / 32, false), 1e-7);
  const double e1 = manufactured_error(1.0 / 16, true);
  const double e2 = manufactured_error(1.0 / 32, true);
  EXPECT_GT(e1 / e2, 3.5);
  EXPECT_LT(e1 / e2, 4.5);
}

TEST(Equilibrium, NonlinearDivergenceForm) {
  auto g = build_grid(GridSpec::unit_disc(1.0 / 16));
  auto data = sample(g, [](Vec2 p) { return 0.5 * std::sin(2 * p.x) * std::cosh(p.y); });
  auto sol = solve_equilibrium(CoefficientModel::div_iso(), data, g);
  EXPECT_TRUE(sol.converged);
  EXPECT_LE(residual_norm(CoefficientModel::div_iso(), sol.w, g), 1e-9);
  for (int k : g.boundary_nodes) EXPECT_EQ(sol.w[k], data[k]);
}

TEST(Equilibrium, JacobianMatchesFiniteDifferences) {
  Poly4 a11{{{1.0, 0, 0, 0, 0}, {0.5, 1, 0, 2, 1}}};
  Poly4 a12{{{0.1, 0, 0, 1, 1}}};
  Poly4 a22{{{2.0, 0, 0, 0, 0}, {0.3, 0, 1, 0, 2}}};
  Poly4 b{{{-1.0, 0, 1, 1, 0}, {0.2, 0, 0, 2, 1}}};
  const auto model = CoefficientModel::poly(a11, a12, a22, b);
  auto g = build_grid(GridSpec::unit_square(1.0 / 10));
  auto w = sample(g, [](Vec2 p) { return std::sin(p.x + 2 * p.y) + p.x * p.y; });
  auto sys = dirichlet_system(model, w, g);
  const double e = 1e-6;
  for (int a : {0, 13, 40}) {
    const int k = sys.dofs.unknown_nodes[a];
    auto wp = w, wm = w;
    wp[k] += e;
    wm[k] -= e;
    for (int b2 = 0; b2 < sys.n(); ++b2) {
      const int kk = sys.dofs.unknown_nodes[b2];
      const double rp = linearize_at(model, g, wp.v, g.col(kk), g.row(kk)).residual;
      const double rm = linearize_at(model, g, wm.v, g.col(kk), g.row(kk)).residual;
      EXPECT_NEAR((rp - rm) / (2 * e), sys.K.coeff(b2, a), 1e-5 * (1 + std::abs(sys.K.coeff(b2, a))));
    }
  }
}

TEST(AlphaFamily, ScalesHarmonicEquilibrium) {
  auto g = build_grid(GridSpec::unit_disc(1.0 / 16));
  auto target = solve_equilibrium(CoefficientModel::iso_plus(), quad(g, 0.3), g);
  auto fam = alpha_family(CoefficientModel::iso_plus(), target, g, 4);
  ASSERT_EQ(fam.solutions.size(), 5u);
  EXPECT_EQ(max_abs(g, fam.solutions[0].w), 0.0);
  for (std::size_t i = 0; i < fam.alphas.size(); ++i) {
    const auto scaled = axpy(fam.alphas[i] - 1.0, target.w, target.w);
    EXPECT_LE(max_abs(g, axpy(-1.0, scaled, fam.solutions[i].w)), 1e-9);
  }
  EXPECT_GT(fam.max_norm_bound, 0.0);
}

TEST(AlphaFamily, MaximumPrincipleSurrogate) {
  auto g = build_grid(GridSpec::unit_disc(1.0 / 16));
  auto data = sample(g, [](Vec2 p) { return 0.6 * std::exp(p.x) * std::cos(p.y); });
  auto target = solve_equilibrium(CoefficientModel::iso_inv(), data, g);
  ASSERT_TRUE(target.converged);
  auto fam = alpha_family(CoefficientModel::iso_inv(), target, g, 6);
  double wmax = 0.0;
  for (int k : g.boundary_nodes) wmax = std::max(wmax, std::abs(target.w[k]));
  for (std::size_t i = 0; i < fam.solutions.size(); ++i)
    for (std::size_t j = i + 1; j < fam.solutions.size(); ++j) {
      const double d = max_abs(g, axpy(-1.0, fam.solutions[i].w, fam.solutions[j].w));
      EXPECT_LE(d, std::abs(fam.alphas[j] - fam.alphas[i]) * wmax + 1e-8);
    }
}
