#include <gtest/gtest.h>

#include <cmath>

#include "geowave/coefficients.hpp"
#include "geowave/grid.hpp"

using namespace geowave;

TEST(Grid, UnitSquareFullControl) {
  auto g = build_grid(GridSpec::unit_square(1.0 / 32));
  EXPECT_EQ(g.nx, 33);
  EXPECT_EQ(g.ny, 33);
  EXPECT_TRUE(g.gamma1_nodes.empty());
  EXPECT_EQ(g.boundary_nodes.size(), 128u);
  EXPECT_EQ(g.interior_nodes.size(), 31u * 31u);
}

TEST(Grid, UnitDiscAllControlled) {
  auto g = build_grid(GridSpec::unit_disc(1.0 / 32));
  EXPECT_EQ(g.nx, 65);
  EXPECT_FALSE(g.boundary_nodes.empty());
  EXPECT_EQ(g.gamma0_nodes.size(), g.boundary_nodes.size());
  for (int k : g.boundary_nodes) {
    const Vec2 n = g.normal[static_cast<std::size_t>(k)];
    EXPECT_NEAR(n.norm(), 1.0, 1e-12);
    const Vec2 p = g.pos(k);
    EXPECT_NEAR(n.dot((1.0 / p.norm()) * p), 1.0, 1e-12);
  }
}

TEST(Grid, PartitionIsDisjointCover) {
  auto spec = GridSpec::unit_square(1.0 / 16);
  spec.gamma1_edges = {Edge::Left};
  auto g = build_grid(spec);
  EXPECT_EQ(g.gamma0_nodes.size() + g.gamma1_nodes.size(), g.boundary_nodes.size());
  EXPECT_EQ(g.gamma1_nodes.size(), 17u);
  for (int k : g.gamma1_nodes) EXPECT_EQ(g.col(k), 0);
  for (int k : g.gamma0_nodes) {
    EXPECT_NE(g.col(k), 0);
    EXPECT_EQ(g.bclass[static_cast<std::size_t>(k)], BoundaryClass::Gamma0);
  }
  for (int k : g.interior_nodes) EXPECT_EQ(g.bclass[static_cast<std::size_t>(k)], BoundaryClass::None);
  auto runs = gamma0_runs(g);
  ASSERT_EQ(runs.size(), 1u);
  EXPECT_EQ(runs[0].nodes.size(), g.gamma0_nodes.size());
}

TEST(Grid, DiscArcPartition) {
  auto spec = GridSpec::unit_disc(1.0 / 16);
  spec.gamma1_arcs = {{kPi / 2, 3 * kPi / 2}};
  auto g = build_grid(spec);
  for (int k : g.gamma1_nodes) EXPECT_LE(g.pos(k).x, 1e-12);
  for (int k : g.gamma0_nodes) EXPECT_GE(g.pos(k).x, -1e-12);
  EXPECT_EQ(gamma0_runs(g).size(), 1u);
}

TEST(Grid, Errors) {
  EXPECT_THROW(build_grid(GridSpec::unit_square(1.0 / 4)), Error);
  auto spec = GridSpec::unit_square(1.0 / 16);
  spec.gamma1_edges = {Edge::Left, Edge::Right, Edge::Top, Edge::Bottom};
  EXPECT_THROW(build_grid(spec), Error);
  EXPECT_THROW(build_grid(GridSpec::rectangle(0, 1, 0, 1, 0.3)), Error);
}

TEST(Gradient, ConstantsAndLinearExact) {
  for (auto spec : {GridSpec::unit_square(1.0 / 16), GridSpec::unit_disc(1.0 / 16)}) {
    auto g = build_grid(spec);
    auto c = gradient(sample(g, [](Vec2) { return 3.5; }), g);
    auto l = gradient(sample(g, [](Vec2 p) { return p.x - 2 * p.y; }), g);
    for (int k : g.domain_nodes) {
      EXPECT_EQ(c.x[k], 0.0);
      EXPECT_EQ(c.y[k], 0.0);
      EXPECT_NEAR(l.x[k], 1.0, 1e-12);
      EXPECT_NEAR(l.y[k], -2.0, 1e-12);
    }
  }
}

TEST(Gradient, ShapeMismatchThrows) {
  auto g = build_grid(GridSpec::unit_square(1.0 / 16));
  auto g2 = build_grid(GridSpec::unit_square(1.0 / 32));
  EXPECT_THROW(gradient(ScalarField(g2), g), Error);
}

namespace {
double gradient_error(double h) {
  auto g = build_grid(GridSpec::unit_square(h));
  auto f = sample(g, [](Vec2 p) { return std::sin(p.x) * std::exp(p.y); });
  auto gr = gradient(f, g);
  double e = 0.0;
  for (int k : g.domain_nodes) {
    const Vec2 p = g.pos(k);
    e = std::max(e, std::abs(gr.x[k] - std::cos(p.x) * std::exp(p.y)));
    e = std::max(e, std::abs(gr.y[k] - std::sin(p.x) * std::exp(p.y)));
  }
  return e;
}
}  // namespace

TEST(Gradient, SecondOrderRichardson) {
  // x^2 - y^2 is reproduced exactly by both stencils, so use a transcendental field.
  const double r = gradient_error(1.0 / 16) / gradient_error(1.0 / 32);
  EXPECT_GT(r, 3.5);
  EXPECT_LT(r, 4.5);
  auto g = build_grid(GridSpec::unit_square(1.0 / 16));
  auto q = gradient(sample(g, [](Vec2 p) { return p.x * p.x - p.y * p.y; }), g);
  for (int k : g.domain_nodes) {
    EXPECT_NEAR(q.x[k], 2 * g.pos(k).x, 1e-12);
    EXPECT_NEAR(q.y[k], -2 * g.pos(k).y, 1e-12);
  }
}

TEST(Coefficients, SpdProbeForBuiltins) {
  std::vector<Vec2> xs;
  for (int i = 0; i < 10; ++i) xs.push_back({i / 9.0, 1.0 - i / 9.0});
  Poly4 one{{{1.0, 0, 0, 0, 0}}};
  Poly4 a11{{{1.0, 0, 0, 0, 0}, {1.0, 0, 0, 2, 0}}};
  Poly4 b{{{-1.0, 0, 1, 1, 0}}};
  for (const auto& m : {CoefficientModel::iso_plus(), CoefficientModel::iso_inv(), CoefficientModel::div_iso(),
                        CoefficientModel::constant({2.0, 0.5, 1.0}), CoefficientModel::poly(a11, {}, one, b)}) {
    auto v = validate_model(m, xs);
    EXPECT_TRUE(v.spd) << to_string(m.family());
    EXPECT_TRUE(v.ok) << to_string(m.family());
    EXPECT_GT(v.min_eig, 0.0);
  }
  EXPECT_FALSE(validate_model(CoefficientModel::poly(one, {}, one, Poly4{{{1.0, 0, 0, 0, 0}}}), xs).ok);
  EXPECT_FALSE(validate_model(CoefficientModel::constant({1.0, 2.0, 1.0}), xs).spd);
}

TEST(Coefficients, DerivativesMatchFiniteDifferences) {
  Poly4 a11{{{1.0, 0, 0, 0, 0}, {0.5, 1, 0, 2, 1}}};
  Poly4 a12{{{0.1, 0, 0, 1, 1}}};
  Poly4 a22{{{2.0, 0, 0, 0, 0}, {0.3, 0, 1, 0, 2}}};
  Poly4 b{{{-1.0, 0, 1, 1, 0}, {0.2, 0, 0, 2, 1}}};
  const Vec2 x{0.3, -0.4}, y{0.7, -0.2};
  const double e = 1e-6;
  for (const auto& m : {CoefficientModel::iso_plus(), CoefficientModel::iso_inv(), CoefficientModel::div_iso(),
                        CoefficientModel::poly(a11, a12, a22, b)}) {
    const auto dA = m.dA(x, y);
    const Vec2 db = m.db(x, y);
    for (int l = 0; l < 2; ++l) {
      const Vec2 dy = l == 0 ? Vec2{e, 0} : Vec2{0, e};
      const Sym2 fd = (1.0 / (2 * e)) * (m.A(x, y + dy) - m.A(x, y - dy));
      EXPECT_NEAR(fd.xx, dA[l].xx, 1e-8);
      EXPECT_NEAR(fd.xy, dA[l].xy, 1e-8);
      EXPECT_NEAR(fd.yy, dA[l].yy, 1e-8);
      EXPECT_NEAR((m.b(x, y + dy) - m.b(x, y - dy)) / (2 * e), db[l], 1e-8);
    }
  }
  // divergence-form flux is consistent with A = d a / dy
  const auto m = CoefficientModel::div_iso();
  for (int l = 0; l < 2; ++l) {
    const Vec2 dy = l == 0 ? Vec2{e, 0} : Vec2{0, e};
    const Vec2 fd = (1.0 / (2 * e)) * (m.flux(x, y + dy) - m.flux(x, y - dy));
    EXPECT_NEAR(fd.x, m.A(x, y)(0, l), 1e-8);
    EXPECT_NEAR(fd.y, m.A(x, y)(1, l), 1e-8);
  }
  EXPECT_THROW(CoefficientModel::iso_plus().flux(x, y), Error);
}
