// Independent reference computations used only by the tests.
#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <utility>
#include <vector>

#include "geowave/geometry.hpp"

namespace oracle {

using geowave::DomainGrid;
using geowave::Sym2;
using geowave::Vec2;

/// Shortest paths on the lattice graph whose edges join nodes at offsets in
/// `stencil`; edge length is the trapezoid average of sqrt(d^T g d) at both ends.
inline std::vector<double> dijkstra(const DomainGrid& grid, const std::vector<Sym2>& g, int source, int reach = 2) {
  std::vector<std::pair<int, int>> offs;
  for (int dj = -reach; dj <= reach; ++dj)
    for (int di = -reach; di <= reach; ++di) {
      if (!di && !dj) continue;
      if (std::gcd(std::abs(di), std::abs(dj)) != 1) continue;
      offs.emplace_back(di, dj);
    }
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> d(static_cast<std::size_t>(grid.size()), inf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  d[static_cast<std::size_t>(source)] = 0.0;
  pq.emplace(0.0, source);
  while (!pq.empty()) {
    auto [dist, k] = pq.top();
    pq.pop();
    if (dist > d[static_cast<std::size_t>(k)]) continue;
    const int i = grid.col(k), j = grid.row(k);
    for (auto [di, dj] : offs) {
      if (!grid.in_domain(i + di, j + dj)) continue;
      const int kk = grid.index(i + di, j + dj);
      const Vec2 step{di * grid.h, dj * grid.h};
      const double len = 0.5 * (std::sqrt(g[static_cast<std::size_t>(k)].quad(step)) +
                                std::sqrt(g[static_cast<std::size_t>(kk)].quad(step)));
      if (dist + len < d[static_cast<std::size_t>(kk)]) {
        d[static_cast<std::size_t>(kk)] = dist + len;
        pq.emplace(d[static_cast<std::size_t>(kk)], kk);
      }
    }
  }
  return d;
}

/// Gauss curvature of g = (1 + |grad w|^2)^{-1} I for harmonic w, worked out
/// symbolically: |D^2 w|^2 / (1 + |grad w|^2).
inline double curvature_iso_plus(double grad2, double hess_frob2) { return hess_frob2 / (1.0 + grad2); }

/// Same for g = (1 + |grad w|^2) I: -|D^2 w|^2 / (1 + |grad w|^2)^3.
inline double curvature_iso_inv(double grad2, double hess_frob2) {
  const double d = 1.0 + grad2;
  return -hess_frob2 / (d * d * d);
}

/// Standing mode sin(pi x) sin(pi y) cos(omega t) on the unit square, omega = c pi sqrt 2.
inline double square_mode(Vec2 p, double t, double c = 1.0) {
  return std::sin(geowave::kPi * p.x) * std::sin(geowave::kPi * p.y) * std::cos(c * geowave::kPi * std::sqrt(2.0) * t);
}

}  // namespace oracle
