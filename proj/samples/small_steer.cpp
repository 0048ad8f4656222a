// Steer the quasilinear equation from rest to a small standing shape in time 3.
#include <cmath>
#include <cstdio>

#include "geowave/steer.hpp"

int main() {
  using namespace geowave;
  const auto g = build_grid(GridSpec::unit_square(1.0 / 32));
  const ScalarField zero(g);
  for (double amp : {1e-3, 1e-2, 1e-1}) {
    const auto target = sample(g, [amp](Vec2 p) { return amp * std::sin(kPi * p.x) * std::sin(kPi * p.y); });
    const auto r = steer_local(CoefficientModel::iso_plus(), zero, {zero, zero, 0.0}, target, zero, g, {});
    std::printf("amplitude %.0e: %s after %d outer iterations, relative error %.3e\n", amp,
                r.leg.accepted ? "reached" : "not reached", r.leg.outer_iterations, r.leg.verified_error);
    if (!r.leg.diagnostic.empty()) std::printf("  %s\n", r.leg.diagnostic.c_str());
  }
}
