// Drive the lowest mode of the flat unit square to rest with a boundary control.
#include <cmath>
#include <cstdio>

#include "geowave/hum.hpp"

int main() {
  using namespace geowave;
  const auto g = build_grid(GridSpec::unit_square(1.0 / 32));
  const auto model = CoefficientModel::constant(Sym2::identity());
  const auto mode = sample(g, [](Vec2 p) { return std::sin(kPi * p.x) * std::sin(kPi * p.y); });
  for (double T : {0.5, 1.5, 3.0}) {
    HumOptions opt;
    opt.T = T;
    const HumOperator op(model, ScalarField(g), g, opt);
    const auto r = solve_null_control(op, op.system().gather(mode), Vec::Zero(op.n()));
    std::printf("T = %.1f: %4d iterations, terminal / initial energy = %.3e%s\n", T, r.iterations,
                r.terminal_energy / r.initial_energy, r.stagnated ? " (stagnated)" : "");
  }
}
