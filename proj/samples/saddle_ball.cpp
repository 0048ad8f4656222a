// Controllability of w = a (x^2 - y^2) under A = (1 + |grad w|^2) I on the unit disc.
#include <cstdio>

#include "geowave/geometry.hpp"

int main() {
  using namespace geowave;
  const auto g = build_grid(GridSpec::unit_disc(1.0 / 48));
  const auto model = CoefficientModel::iso_plus();
  std::printf("%6s %10s %10s %8s %8s %s\n", "a", "kappa", "radius", "rho0", "T0", "verdict");
  for (double a : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}) {
    const auto w = sample(g, [a](Vec2 p) { return a * (p.x * p.x - p.y * p.y); });
    const auto r = proposition_1_1(model, w, g);
    std::printf("%6.2f %10.5f %10.5f %8.4f %8.4f %s%s\n", a, r.kappa, r.ball_radius.value_or(0.0), r.rho0,
                r.T0.value_or(-1.0), r.controllable ? "controllable" : "not controllable",
                r.ball_criterion ? " (ball)" : "");
  }
}
