#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "geowave/hum.hpp"
#include "oracles.hpp"

using namespace geowave;

namespace {

const CoefficientModel kFlat = CoefficientModel::constant(Sym2::identity());

HumOptions dirichlet_options(double T) {
  HumOptions o;
  o.action = Action::Dirichlet;
  o.T = T;
  return o;
}

HumOptions neumann_options(double T) {
  HumOptions o;
  o.action = Action::Neumann;
  o.T = T;
  o.x0 = Vec2{0.0, 0.5};
  return o;
}

GridSpec square_clamped_left(double h) {
  auto s = GridSpec::unit_square(h);
  s.gamma1_edges = {Edge::Left};
  return s;
}

Vec random_dual(const HumOperator& op, std::mt19937_64& rng) {
  return op.stack(smooth_random_field(op.system(), rng), smooth_random_field(op.system(), rng));
}

double relative_asymmetry(const HumOperator& op, const Vec& x, const Vec& y) {
  const double a = op.dot(op.apply(x), y), b = op.dot(op.apply(y), x);
  return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
}

Vec mode_data(const LinearWaveSystem& sys, double amp) {
  const auto f = sample(sys.grid, [&](Vec2 p) { return amp * std::sin(kPi * p.x) * std::sin(kPi * p.y); });
  return sys.gather(f);
}

}  // namespace

TEST(Cutoff, IsAMonotoneWindow) {
  const auto g = build_grid(GridSpec::unit_square(1.0 / 16));
  const HumOperator op(kFlat, ScalarField(g), g, dirichlet_options(3.0));
  const Vec& z = op.z();
  EXPECT_DOUBLE_EQ(z[0], 1.0);
  EXPECT_NEAR(z[z.size() - 1], 0.0, 1e-15);
  for (int n = 0; n < z.size(); ++n) {
    EXPECT_GE(z[n], 0.0);
    EXPECT_LE(z[n], 1.0);
    if (n > 0) EXPECT_LE(z[n], z[n - 1]);
    if (op.time().t(n) <= op.knee()) EXPECT_DOUBLE_EQ(z[n], 1.0);
  }
}

TEST(Gram, DirichletIsSymmetric) {
  const auto g = build_grid(GridSpec::unit_square(1.0 / 32));
  const HumOperator op(kFlat, ScalarField(g), g, dirichlet_options(3.0));
  std::mt19937_64 rng(7);
  for (int k = 0; k < 10; ++k) {
    const Vec x = random_dual(op, rng), y = random_dual(op, rng);
    EXPECT_LE(relative_asymmetry(op, x, y), 1e-9) << k;
  }
}

TEST(Gram, IdentityMatchesTraceForm) {
  const auto g = build_grid(GridSpec::unit_square(1.0 / 32));
  const HumOperator op(kFlat, ScalarField(g), g, dirichlet_options(3.0));
  std::mt19937_64 rng(11);
  for (int k = 0; k < 3; ++k) {
    const Vec x = random_dual(op, rng);
    const double lhs = op.dot(op.apply(x), x), rhs = op.gram(x);
    EXPECT_GT(rhs, 0.0);
    EXPECT_LE(std::abs(lhs - rhs) / rhs, 1e-8);
  }
}

TEST(Gram, IsPositiveSemidefinite) {
  const auto g = build_grid(GridSpec::unit_square(1.0 / 16));
  const HumOperator op(kFlat, ScalarField(g), g, dirichlet_options(1.0));
  std::mt19937_64 rng(3);
  for (int k = 0; k < 10; ++k) {
    const Vec x = random_dual(op, rng);
    EXPECT_GE(op.dot(op.apply(x), x), -1e-12);
  }
}

TEST(Gram, ScalesLinearly) {
  const auto g = build_grid(GridSpec::unit_square(1.0 / 16));
  const HumOperator op(kFlat, ScalarField(g), g, dirichlet_options(2.0));
  std::mt19937_64 rng(5);
  const Vec x = random_dual(op, rng), y = random_dual(op, rng);
  const Vec lhs = op.apply(2.5 * x - y);
  const Vec rhs = 2.5 * op.apply(x) - op.apply(y);
  EXPECT_LE((lhs - rhs).norm(), 1e-10 * rhs.norm());
}

TEST(Gram, BackwardStateConvergesUnderRefinement) {
  // psi(0) from the same smooth dual data on three nested grids, compared on the coarse nodes
  const double hs[3] = {1.0 / 16, 1.0 / 32, 1.0 / 64};
  std::vector<DomainGrid> grids;
  std::vector<ScalarField> psi0;
  for (double h : hs) {
    grids.push_back(build_grid(GridSpec::unit_square(h)));
    const DomainGrid& g = grids.back();
    const HumOperator op(kFlat, ScalarField(g), g, dirichlet_options(1.0));
    const Vec phi0 = mode_data(op.system(), 1.0);
    const Vec phi1 = Vec::Zero(op.n());
    const Vec out = op.apply(op.stack(phi0, phi1));
    psi0.push_back(op.system().scatter(-op.second(out)));
  }
  auto diff = [&](int a, int b) {
    double m = 0.0;
    for (int k : grids[0].domain_nodes) {
      const Vec2 p = grids[0].pos(k);
      const double va = psi0[static_cast<std::size_t>(a)][grids[static_cast<std::size_t>(a)].nearest_domain_node(p)];
      const double vb = psi0[static_cast<std::size_t>(b)][grids[static_cast<std::size_t>(b)].nearest_domain_node(p)];
      m = std::max(m, std::abs(va - vb));
    }
    return m;
  };
  const double d1 = diff(0, 1), d2 = diff(1, 2);
  EXPECT_TRUE(std::isfinite(d1) && std::isfinite(d2));
  EXPECT_GT(max_abs(grids[2], psi0[2]), 0.0);
  EXPECT_GE(d1 / d2, 1.5) << d1 << " " << d2;
}

TEST(Krylov, ZeroTargetNeedsNoIterations) {
  const auto g = build_grid(GridSpec::unit_square(1.0 / 16));
  const HumOperator op(kFlat, ScalarField(g), g, dirichlet_options(3.0));
  const auto r = solve_null_control(op, Vec::Zero(op.n()), Vec::Zero(op.n()));
  EXPECT_EQ(r.iterations, 0);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.control.values.norm(), 0.0);
  EXPECT_EQ(r.terminal_energy, 0.0);
}

TEST(Krylov, ResidualIsNonincreasing) {
  const auto g = build_grid(GridSpec::unit_square(1.0 / 32));
  const HumOperator op(kFlat, ScalarField(g), g, dirichlet_options(3.0));
  std::mt19937_64 rng(2);
  const Vec v0 = smooth_random_field(op.system(), rng), v1 = smooth_random_field(op.system(), rng);
  const auto r = solve_null_control(op, v0, v1);
  ASSERT_GE(r.residual_history.size(), 2u);
  for (std::size_t k = 1; k < r.residual_history.size(); ++k)
    EXPECT_LE(r.residual_history[k], r.residual_history[k - 1] * (1.0 + 1e-12)) << k;
}

TEST(Krylov, ControlScalesWithTarget) {
  const auto g = build_grid(GridSpec::unit_square(1.0 / 16));
  const HumOperator op(kFlat, ScalarField(g), g, dirichlet_options(3.0));
  const Vec v0 = mode_data(op.system(), 1e-3);
  const auto a = solve_null_control(op, v0, Vec::Zero(op.n()));
  const auto b = solve_null_control(op, 4.0 * v0, Vec::Zero(op.n()));
  EXPECT_LE((b.control.values - 4.0 * a.control.values).norm(), 1e-9 * b.control.values.norm());
}

TEST(Krylov, DirichletNullControlEmptiesTheEnergy) {
  const auto g = build_grid(GridSpec::unit_square(1.0 / 16));
  const HumOperator op(kFlat, ScalarField(g), g, dirichlet_options(3.0));
  const auto r = solve_null_control(op, mode_data(op.system(), 1.0), Vec::Zero(op.n()));
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.terminal_energy, 1e-6 * r.initial_energy);
}

TEST(Neumann, MultiplierMatchesFlatFormula) {
  const double h = 1.0 / 32;
  const auto g = build_grid(square_clamped_left(h));
  const auto opt = neumann_options(4.0);
  const HumOperator op(kFlat, ScalarField(g), g, opt);
  const auto& nodes = op.system().dofs.control_nodes;
  for (std::size_t b = 0; b < nodes.size(); ++b) {
    const int k = nodes[b];
    const Vec2 p = g.pos(k), nu = g.normal[static_cast<std::size_t>(k)];
    const double expected = 2.0 * (p - *opt.x0).dot(nu);
    EXPECT_LE(std::abs(op.h0()[static_cast<Eigen::Index>(b)] - expected), 5 * h) << p.x << "," << p.y;
  }
}

TEST(Neumann, GramIsSymmetric) {
  const auto g = build_grid(square_clamped_left(1.0 / 32));
  const HumOperator op(kFlat, ScalarField(g), g, neumann_options(4.0));
  std::mt19937_64 rng(13);
  for (int k = 0; k < 5; ++k) {
    const Vec x = random_dual(op, rng), y = random_dual(op, rng);
    EXPECT_LE(relative_asymmetry(op, x, y), 1e-8) << k;
  }
}

TEST(Neumann, PsiStarIsNonnegative) {
  const auto g = build_grid(square_clamped_left(1.0 / 16));
  const HumOperator op(kFlat, ScalarField(g), g, neumann_options(4.0));
  const auto probe = observability_probe(op, 10, 21, false);
  ASSERT_EQ(probe.psi_star.size(), 10u);
  for (double v : probe.psi_star) EXPECT_GE(v, 0.0);
}

TEST(Probe, LongHorizonObserves) {
  const auto g = build_grid(GridSpec::unit_square(1.0 / 32));
  const HumOperator op(kFlat, ScalarField(g), g, dirichlet_options(3.0));
  const auto probe = observability_probe(op, 10, 1);
  EXPECT_GT(probe.c1_hat, 0.1);
  EXPECT_GE(probe.c2_hat, probe.c1_hat);
}

TEST(Probe, ShortHorizonMissesACentralBump) {
  const auto g = build_grid(GridSpec::unit_square(1.0 / 32));
  const HumOperator op(kFlat, ScalarField(g), g, dirichlet_options(0.2));
  const auto probe = observability_probe(op, 10, 1);
  ASSERT_TRUE(probe.adversarial_value.has_value());
  EXPECT_LE(*probe.adversarial_value, 1e-8);
  EXPECT_LE(probe.c1_hat, 1e-8);
}

TEST(Probe, NeedsTenSamples) {
  const auto g = build_grid(GridSpec::unit_square(1.0 / 16));
  const HumOperator op(kFlat, ScalarField(g), g, dirichlet_options(1.0));
  EXPECT_THROW(observability_probe(op, 5, 1), Error);
}
