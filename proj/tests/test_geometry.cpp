#include <gtest/gtest.h>

#include <cmath>

#include "geowave/geometry.hpp"
#include "oracles.hpp"

using namespace geowave;

namespace {

ScalarField quad(const DomainGrid& g, double a) {
  return sample(g, [a](Vec2 p) { return a * (p.x * p.x - p.y * p.y); });
}

/// Max curvature error over |x| <= 0.7 for the harmonic field w = c e^x cos y,
/// or w = c (x^2 - y^2) when `quadratic`. The fixed region keeps the node sets comparable.
double curvature_field_error(double h, const CoefficientModel& m, double c, bool plus, bool quadratic) {
  auto g = build_grid(GridSpec::unit_disc(h));
  auto w = quadratic ? quad(g, c) : sample(g, [c](Vec2 p) { return c * std::exp(p.x) * std::cos(p.y); });
  auto metric = build_metric(m, w, g);
  auto k = gauss_curvature(metric, g);
  double e = 0.0;
  for (int n : g.interior_nodes) {
    if (std::isnan(k.k[n])) continue;
    const Vec2 p = g.pos(n);
    if (p.norm() > 0.7) continue;
    const double grad2 = quadratic ? 4 * c * c * p.norm2() : c * c * std::exp(2 * p.x);
    const double hess2 = quadratic ? 8 * c * c : 2 * c * c * std::exp(2 * p.x);
    const double ref = plus ? oracle::curvature_iso_plus(grad2, hess2) : oracle::curvature_iso_inv(grad2, hess2);
    e = std::max(e, std::abs(k.k[n] - ref));
  }
  return e;
}

}  // namespace

TEST(Metric, IsoPlusZeroEquilibriumIsIdentity) {
  auto g = build_grid(GridSpec::unit_square(1.0 / 16));
  auto m = build_metric(CoefficientModel::iso_plus(), ScalarField(g), g);
  for (int k : g.domain_nodes) {
    EXPECT_EQ(m.g[k].xx, 1.0);
    EXPECT_EQ(m.g[k].xy, 0.0);
    EXPECT_EQ(m.g[k].yy, 1.0);
  }
}

TEST(Metric, HandEvaluatedNodes) {
  auto g = build_grid(GridSpec::unit_square(1.0 / 16));
  auto m = build_metric(CoefficientModel::iso_plus(), sample(g, [](Vec2 p) { return p.x * p.y; }), g);
  const int k = g.index(16, 0);  // (1, 0)
  EXPECT_NEAR(m.g[k].xx, 0.5, 1e-12);
  EXPECT_NEAR(m.g[k].yy, 0.5, 1e-12);
  EXPECT_NEAR(m.g[k].xy, 0.0, 1e-12);

  auto mi = build_metric(CoefficientModel::iso_inv(), sample(g, [](Vec2 p) { return p.x + std::sqrt(2.0) * p.y; }), g);
  for (int kk : g.domain_nodes) {
    EXPECT_NEAR(mi.g[kk].xx, 4.0, 1e-10);
    EXPECT_NEAR(mi.g[kk].yy, 4.0, 1e-10);
  }
}

TEST(Metric, InverseOfCoefficients) {
  auto g = build_grid(GridSpec::unit_disc(1.0 / 16));
  auto m = build_metric(CoefficientModel::div_iso(), quad(g, 0.4), g);
  for (int k : g.domain_nodes) {
    const auto p = mul(m.g[k], m.A[k]);
    EXPECT_NEAR(p[0], 1.0, 1e-10);
    EXPECT_NEAR(p[1], 0.0, 1e-10);
    EXPECT_NEAR(p[2], 0.0, 1e-10);
    EXPECT_NEAR(p[3], 1.0, 1e-10);
    EXPECT_GT(m.g[k].min_eig(), 0.0);
  }
}

TEST(Metric, NonSpdThrows) {
  auto g = build_grid(GridSpec::unit_square(1.0 / 16));
  auto m = CoefficientModel::constant({1.0, 2.0, 1.0});
  EXPECT_THROW(build_metric(m, ScalarField(g), g), Error);
}

TEST(Metric, ChristoffelOfConformalMetric) {
  auto g = build_grid(GridSpec::unit_square(1.0 / 32));
  Poly4 a{{{1.0, 0, 0, 0, 0}, {1.0, 2, 0, 0, 0}}};  // A = (1 + x^2) I, g = I/(1 + x^2)
  auto model = CoefficientModel::poly(a, {}, a, {});
  auto m = build_metric(model, ScalarField(g), g);
  const int k = g.index(16, 16);
  const double x = g.pos(k).x;
  // g = s(x) I, s = 1/(1+x^2), s' = -2x/(1+x^2)^2; Gamma^x_xx = s'/(2s), Gamma^x_yy = -s'/(2s)
  const double ratio = -2 * x / (1 + x * x);
  EXPECT_NEAR(m.christoffel[k][0].xx, 0.5 * ratio, 1e-3);
  EXPECT_NEAR(m.christoffel[k][0].yy, -0.5 * ratio, 1e-3);
  EXPECT_NEAR(m.christoffel[k][1].xy, 0.5 * ratio, 1e-3);
  EXPECT_NEAR(m.christoffel[k][0].xy, 0.0, 1e-12);
}

TEST(Curvature, FlatIsZero) {
  auto g = build_grid(GridSpec::unit_disc(1.0 / 16));
  auto c = gauss_curvature(build_metric(CoefficientModel::constant({2.0, 0.3, 1.0}), ScalarField(g), g), g);
  for (int k : g.interior_nodes)
    if (!std::isnan(c.k[k])) EXPECT_NEAR(c.k[k], 0.0, 1e-10);
}

TEST(Curvature, IsoPlusQuadraticEquilibrium) {
  const double a = 0.3;
  auto g = build_grid(GridSpec::unit_disc(1.0 / 32));
  auto c = gauss_curvature(build_metric(CoefficientModel::iso_plus(), quad(g, a), g), g);
  EXPECT_NEAR(c.kappa, 8 * a * a, 0.02 * 8 * a * a);
  const double e1 = curvature_field_error(1.0 / 16, CoefficientModel::iso_plus(), a, true, true);
  const double e2 = curvature_field_error(1.0 / 32, CoefficientModel::iso_plus(), a, true, true);
  EXPECT_GE(e1 / e2, 3.5);
  const double f1 = curvature_field_error(1.0 / 16, CoefficientModel::iso_plus(), 0.4, true, false);
  const double f2 = curvature_field_error(1.0 / 32, CoefficientModel::iso_plus(), 0.4, true, false);
  EXPECT_GE(f1 / f2, 3.5);
}

TEST(Curvature, IsoInvIsNonPositive) {
  const double a = 0.3;
  auto g = build_grid(GridSpec::unit_disc(1.0 / 32));
  auto c = gauss_curvature(build_metric(CoefficientModel::iso_inv(), quad(g, a), g), g);
  EXPECT_LE(c.kappa, 1e-3);
  // the metric is a quadratic polynomial here, so centred differences are exact
  EXPECT_LE(curvature_field_error(1.0 / 16, CoefficientModel::iso_inv(), a, false, true), 1e-9);
  const double f1 = curvature_field_error(1.0 / 16, CoefficientModel::iso_inv(), 0.4, false, false);
  const double f2 = curvature_field_error(1.0 / 32, CoefficientModel::iso_inv(), 0.4, false, false);
  EXPECT_GE(f1 / f2, 3.5);
}

TEST(Distance, FlatIsEuclidean) {
  for (auto spec : {GridSpec::unit_square(1.0 / 32), GridSpec::unit_disc(1.0 / 32)}) {
    auto g = build_grid(spec);
    auto m = build_metric(CoefficientModel::constant(Sym2::identity()), ScalarField(g), g);
    const int x0 = g.nearest_domain_node(g.geometric_center() + Vec2{0.1, -0.05});
    auto d = distance_field(m, x0, g);
    EXPECT_TRUE(d.converged);
    EXPECT_EQ(d.rho[x0], 0.0);
    for (int k : g.domain_nodes) EXPECT_NEAR(d.rho[k], (g.pos(k) - g.pos(x0)).norm(), 2 * g.h);
  }
}

TEST(Distance, ScaledIsotropic) {
  const double lam = 1.7;
  auto g = build_grid(GridSpec::unit_disc(1.0 / 32));
  auto m = build_metric(CoefficientModel::constant(Sym2::identity(lam * lam)), ScalarField(g), g);
  const int x0 = g.nearest_domain_node({0, 0});
  auto d = distance_field(m, x0, g);
  for (int k : g.domain_nodes) EXPECT_NEAR(d.rho[k], g.pos(k).norm() / lam, 1e-9);
}

TEST(Distance, AgreesWithGraphShortestPaths) {
  auto g = build_grid(GridSpec::unit_disc(1.0 / 32));
  auto m = build_metric(CoefficientModel::iso_plus(), quad(g, 0.3), g);
  const int x0 = g.nearest_domain_node({0, 0});
  auto d = distance_field(m, x0, g);
  auto ref = oracle::dijkstra(g, m.g, x0, 2);
  double err = 0.0;
  for (int k : g.domain_nodes) err = std::max(err, std::abs(d.rho[k] - ref[k]));
  EXPECT_LE(err, 3 * g.h);
  // monotone along the rays of the lattice axes and diagonals
  const int c = g.col(x0), r = g.row(x0);
  const int dirs[8][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  for (const auto& dv : dirs) {
    double prev = 0.0;
    for (int s = 1; g.in_domain(c + s * dv[0], r + s * dv[1]); ++s) {
      const double v = d.rho[g.index(c + s * dv[0], r + s * dv[1])];
      EXPECT_GT(v, prev);
      prev = v;
    }
  }
}

TEST(Convexity, FlatConstantIsTwo) {
  for (auto spec : {GridSpec::unit_disc(1.0 / 32), GridSpec::unit_square(1.0 / 32)}) {
    auto g = build_grid(spec);
    auto m = build_metric(CoefficientModel::constant(Sym2::identity()), ScalarField(g), g);
    const int x0 = g.nearest_domain_node(g.geometric_center());
    auto d = distance_field(m, x0, g);
    auto c = convexity_constant(m, d.rho, g);
    EXPECT_NEAR(c.rho0, 2.0, 5 * g.h);
    EXPECT_GT(c.excluded, 0);
  }
}

TEST(Convexity, IsoInvEquilibriumOnDisc) {
  auto g = build_grid(GridSpec::unit_disc(1.0 / 32));
  auto m = build_metric(CoefficientModel::iso_inv(), quad(g, 0.3), g);
  auto d = distance_field(m, g.nearest_domain_node({0, 0}), g);
  EXPECT_GT(convexity_constant(m, d.rho, g).rho0, 0.0);
}

TEST(Proposition, FlatControlTime) {
  auto g = build_grid(GridSpec::unit_disc(1.0 / 32));
  auto r = proposition_1_1(CoefficientModel::constant(Sym2::identity()), ScalarField(g), g);
  EXPECT_TRUE(r.kappa_nonpositive);
  EXPECT_TRUE(r.controllable);
  ASSERT_TRUE(r.T0.has_value());
  EXPECT_NEAR(*r.T0, 2.0 * r.sup_rho, 5 * g.h);
  EXPECT_NEAR(*r.T0, 2.0, 5 * g.h);
}

TEST(Proposition, BallCriterionForSaddle) {
  auto g = build_grid(GridSpec::unit_disc(1.0 / 32));
  auto r3 = proposition_1_1(CoefficientModel::iso_plus(), quad(g, 0.3), g);
  EXPECT_NEAR(r3.lambda, 1.0, 1e-12);
  ASSERT_TRUE(r3.ball_radius.has_value());
  EXPECT_NEAR(*r3.ball_radius, kPi / (4 * std::sqrt(2.0) * 0.3), 0.05);
  EXPECT_TRUE(r3.ball_criterion);
  EXPECT_TRUE(r3.controllable);
  auto r6 = proposition_1_1(CoefficientModel::iso_plus(), quad(g, 0.6), g);
  EXPECT_FALSE(r6.ball_criterion);
  EXPECT_NEAR(*r6.ball_radius, kPi / (4 * std::sqrt(2.0) * 0.6), 0.05);
}

TEST(Proposition, IsoInvSaddleIsControllable) {
  auto g = build_grid(GridSpec::unit_disc(1.0 / 32));
  auto r = proposition_1_1(CoefficientModel::iso_inv(), quad(g, 0.8), g);
  EXPECT_TRUE(r.kappa_nonpositive);
  EXPECT_TRUE(r.controllable);
}

TEST(Proposition, RejectsNonEquilibrium) {
  auto g = build_grid(GridSpec::unit_square(1.0 / 16));
  auto w = sample(g, [](Vec2 p) { return p.x * p.x; });
  EXPECT_THROW(proposition_1_1(CoefficientModel::iso_plus(), w, g), Error);
}

TEST(Proposition, SignConditionOnClampedEdge) {
  auto spec = GridSpec::unit_square(1.0 / 32);
  spec.gamma1_edges = {Edge::Left};
  auto g = build_grid(spec);
  GeometryOptions opt;
  opt.center_mode = CenterMode::Explicit;
  opt.center = {0.0, 0.5};
  auto good = proposition_1_1(CoefficientModel::constant(Sym2::identity()), ScalarField(g), g, opt);
  EXPECT_TRUE(good.gamma1_sign_condition);
  EXPECT_TRUE(good.controllable);
  EXPECT_NEAR(*good.T0, 2.0 * std::sqrt(1.25), 5 * g.h);
  opt.center = {1.0, 0.5};
  auto bad = proposition_1_1(CoefficientModel::constant(Sym2::identity()), ScalarField(g), g, opt);
  EXPECT_FALSE(bad.gamma1_sign_condition);
  EXPECT_FALSE(bad.controllable);
}

TEST(Proposition, VerdictMonotoneInAmplitude) {
  auto g = build_grid(GridSpec::rectangle(-1.0, 1.0, -0.5, 0.5, 1.0 / 16));
  bool seen_false = false;
  for (double a : {0.2, 0.4, 0.6, 0.8, 1.0, 1.2}) {
    auto r = proposition_1_1(CoefficientModel::iso_plus(), quad(g, a), g);
    EXPECT_EQ(r.hessian_criterion, r.rho0 > 0.0);
    if (seen_false) EXPECT_FALSE(r.controllable) << "a = " << a;
    if (!r.controllable) seen_false = true;
  }
}
