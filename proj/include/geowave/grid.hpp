// Lattice geometry of the spatial domain, boundary partition and node fields.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "geowave/core.hpp"

namespace geowave {

enum class ShapeKind { Rectangle, Disc };
enum class Edge { Left, Right, Bottom, Top };
enum class NodeKind : std::uint8_t { Outside, Interior, Boundary };
enum class BoundaryClass : std::uint8_t { None, Gamma0, Gamma1 };

inline const char* to_string(ShapeKind s) { return s == ShapeKind::Rectangle ? "rectangle" : "disc"; }
inline const char* to_string(Edge e) {
  switch (e) {
    case Edge::Left: return "left";
    case Edge::Right: return "right";
    case Edge::Bottom: return "bottom";
    case Edge::Top: return "top";
  }
  return "?";
}

/// Domain shape, resolution and the rule assigning boundary pieces to the
/// clamped part. Everything not listed as clamped is controlled.
struct GridSpec {
  ShapeKind shape = ShapeKind::Rectangle;
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  Vec2 center{0.0, 0.0};
  double radius = 1.0;
  double h = 1.0 / 32.0;
  std::vector<Edge> gamma1_edges;
  /// Angular intervals [a, b] (radians, a < b, may exceed pi) of the clamped arcs.
  std::vector<std::pair<double, double>> gamma1_arcs;

  static GridSpec unit_square(double h) {
    GridSpec s;
    s.h = h;
    return s;
  }
  static GridSpec unit_disc(double h) {
    GridSpec s;
    s.shape = ShapeKind::Disc;
    s.h = h;
    return s;
  }
  static GridSpec rectangle(double x0, double x1, double y0, double y1, double h) {
    GridSpec s;
    s.xmin = x0;
    s.xmax = x1;
    s.ymin = y0;
    s.ymax = y1;
    s.h = h;
    return s;
  }
};

struct DomainGrid {
  GridSpec spec;
  int nx = 0;
  int ny = 0;
  double h = 0.0;
  Vec2 origin;
  std::vector<NodeKind> kind;
  std::vector<BoundaryClass> bclass;
  std::vector<Vec2> normal;  // outward unit normal on boundary nodes, zero elsewhere
  std::vector<int> interior_nodes;
  std::vector<int> boundary_nodes;
  std::vector<int> gamma0_nodes;
  std::vector<int> gamma1_nodes;
  std::vector<int> domain_nodes;
  /// Boundary nodes ordered counter-clockwise around the domain centre.
  std::vector<int> boundary_cycle;

  int size() const { return nx * ny; }
  int index(int i, int j) const { return j * nx + i; }
  int col(int k) const { return k % nx; }
  int row(int k) const { return k / nx; }
  Vec2 pos(int i, int j) const { return {origin.x + i * h, origin.y + j * h}; }
  Vec2 pos(int k) const { return pos(col(k), row(k)); }
  bool valid(int i, int j) const { return i >= 0 && j >= 0 && i < nx && j < ny; }
  bool in_domain(int i, int j) const { return valid(i, j) && kind[index(i, j)] != NodeKind::Outside; }
  bool is_interior(int i, int j) const { return valid(i, j) && kind[index(i, j)] == NodeKind::Interior; }
  bool is_domain(int k) const { return kind[k] != NodeKind::Outside; }

  Vec2 geometric_center() const {
    if (spec.shape == ShapeKind::Disc) return spec.center;
    return {0.5 * (spec.xmin + spec.xmax), 0.5 * (spec.ymin + spec.ymax)};
  }

  /// sup over the closed (continuous) domain of |x - p|.
  double max_distance_from(Vec2 p) const {
    if (spec.shape == ShapeKind::Disc) return (p - spec.center).norm() + spec.radius;
    double best = 0.0;
    for (double x : {spec.xmin, spec.xmax})
      for (double y : {spec.ymin, spec.ymax}) best = std::max(best, (Vec2{x, y} - p).norm());
    return best;
  }

  int nearest_domain_node(Vec2 p) const {
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (int k : domain_nodes) {
      const double d = (pos(k) - p).norm2();
      if (d < bd) {
        bd = d;
        best = k;
      }
    }
    return best;
  }
};

namespace detail {

inline double wrap_angle(double a) {
  const double two_pi = 2.0 * kPi;
  a = std::fmod(a, two_pi);
  if (a < 0) a += two_pi;
  return a;
}

inline bool angle_in_arc(double theta, double a, double b) {
  const double span = b - a;
  if (span >= 2.0 * kPi) return true;
  const double rel = wrap_angle(theta - a);
  return rel <= span + 1e-12;
}

}  // namespace detail

inline DomainGrid build_grid(const GridSpec& spec) {
  require(spec.h > 0.0, ErrorCode::InvalidArgument, "grid spacing must be positive");
  DomainGrid g;
  g.spec = spec;
  g.h = spec.h;
  const double h = spec.h;
  if (spec.shape == ShapeKind::Rectangle) {
    require(spec.xmax > spec.xmin && spec.ymax > spec.ymin, ErrorCode::InvalidArgument,
            "degenerate rectangle");
    const double lx = (spec.xmax - spec.xmin) / h;
    const double ly = (spec.ymax - spec.ymin) / h;
    g.nx = static_cast<int>(std::llround(lx)) + 1;
    g.ny = static_cast<int>(std::llround(ly)) + 1;
    require(std::abs(lx - (g.nx - 1)) < 1e-8 && std::abs(ly - (g.ny - 1)) < 1e-8,
            ErrorCode::InvalidArgument, "spacing must divide the rectangle sides");
    g.origin = {spec.xmin, spec.ymin};
  } else {
    require(spec.radius > 0.0, ErrorCode::InvalidArgument, "disc radius must be positive");
    const int m = static_cast<int>(std::ceil(spec.radius / h - 1e-9));
    g.nx = g.ny = 2 * m + 1;
    g.origin = {spec.center.x - m * h, spec.center.y - m * h};
  }
  require(g.nx >= 8 && g.ny >= 8, ErrorCode::InvalidArgument,
          "resolution below minimum (need at least 8 nodes per direction)");

  const int n = g.size();
  g.kind.assign(n, NodeKind::Outside);
  g.bclass.assign(n, BoundaryClass::None);
  g.normal.assign(n, Vec2{});

  std::vector<std::uint8_t> inside(n, 0);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (spec.shape == ShapeKind::Rectangle) {
        inside[g.index(i, j)] = 1;
      } else {
        const Vec2 d = g.pos(i, j) - spec.center;
        inside[g.index(i, j)] = d.norm() <= spec.radius * (1.0 + 1e-12) + 1e-12 ? 1 : 0;
      }
    }

  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const int k = g.index(i, j);
      if (!inside[k]) continue;
      bool all = true;
      for (int dj = -1; dj <= 1 && all; ++dj)
        for (int di = -1; di <= 1; ++di) {
          const int ii = i + di, jj = j + dj;
          if (!g.valid(ii, jj) || !inside[g.index(ii, jj)]) {
            all = false;
            break;
          }
        }
      g.kind[k] = all ? NodeKind::Interior : NodeKind::Boundary;
    }

  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const int k = g.index(i, j);
      if (g.kind[k] == NodeKind::Outside) continue;
      g.domain_nodes.push_back(k);
      if (g.kind[k] == NodeKind::Interior) {
        g.interior_nodes.push_back(k);
        continue;
      }
      g.boundary_nodes.push_back(k);
      bool clamped = false;
      Vec2 nrm{};
      if (spec.shape == ShapeKind::Rectangle) {
        auto on = [&](Edge e) {
          switch (e) {
            case Edge::Left: return i == 0;
            case Edge::Right: return i == g.nx - 1;
            case Edge::Bottom: return j == 0;
            case Edge::Top: return j == g.ny - 1;
          }
          return false;
        };
        const std::pair<Edge, Vec2> edges[] = {{Edge::Left, {-1, 0}},
                                               {Edge::Right, {1, 0}},
                                               {Edge::Bottom, {0, -1}},
                                               {Edge::Top, {0, 1}}};
        Vec2 clamped_nrm{};
        for (const auto& [e, en] : edges) {
          if (!on(e)) continue;
          nrm = nrm + en;
          if (std::find(spec.gamma1_edges.begin(), spec.gamma1_edges.end(), e) !=
              spec.gamma1_edges.end()) {
            clamped = true;
            clamped_nrm = clamped_nrm + en;
          }
        }
        // a corner owned by the clamped side takes that side's normal
        if (clamped) nrm = clamped_nrm;
      } else {
        nrm = g.pos(k) - spec.center;
        const double theta = std::atan2(nrm.y, nrm.x);
        for (const auto& [a, b] : spec.gamma1_arcs)
          if (detail::angle_in_arc(theta, a, b)) clamped = true;
      }
      const double len = nrm.norm();
      g.normal[k] = len > 0 ? (1.0 / len) * nrm : Vec2{1.0, 0.0};
      g.bclass[k] = clamped ? BoundaryClass::Gamma1 : BoundaryClass::Gamma0;
      (clamped ? g.gamma1_nodes : g.gamma0_nodes).push_back(k);
    }
  require(!g.gamma0_nodes.empty(), ErrorCode::InvalidArgument,
          "control set Gamma0 is empty");

  const Vec2 c = g.geometric_center();
  g.boundary_cycle = g.boundary_nodes;
  std::vector<double> ang(n, 0.0), rad(n, 0.0);
  for (int k : g.boundary_nodes) {
    const Vec2 d = g.pos(k) - c;
    ang[k] = detail::wrap_angle(std::atan2(d.y, d.x));
    rad[k] = d.norm();
  }
  std::stable_sort(g.boundary_cycle.begin(), g.boundary_cycle.end(), [&](int a, int b) {
    if (ang[a] != ang[b]) return ang[a] < ang[b];
    return rad[a] < rad[b];
  });
  return g;
}

/// Maximal runs of consecutive Gamma0 nodes along the boundary cycle.
struct BoundaryRun {
  std::vector<int> nodes;
  bool cyclic = false;
};

inline std::vector<BoundaryRun> gamma0_runs(const DomainGrid& g) {
  std::vector<BoundaryRun> runs;
  const auto& cyc = g.boundary_cycle;
  const int m = static_cast<int>(cyc.size());
  auto is0 = [&](int idx) { return g.bclass[cyc[((idx % m) + m) % m]] == BoundaryClass::Gamma0; };
  if (g.gamma1_nodes.empty()) {
    runs.push_back({cyc, true});
    return runs;
  }
  int start = 0;
  while (is0(start)) ++start;  // start on a clamped node
  for (int s = 0; s < m; ++s) {
    const int idx = start + s;
    if (!is0(idx)) continue;
    if (s > 0 && is0(idx - 1)) {
      runs.back().nodes.push_back(cyc[idx % m]);
    } else {
      runs.push_back({{cyc[idx % m]}, false});
    }
  }
  return runs;
}

struct ScalarField {
  int nx = 0;
  int ny = 0;
  std::vector<double> v;

  ScalarField() = default;
  explicit ScalarField(const DomainGrid& g, double value = 0.0)
      : nx(g.nx), ny(g.ny), v(static_cast<std::size_t>(g.size()), value) {}

  double& operator[](int k) { return v[static_cast<std::size_t>(k)]; }
  double operator[](int k) const { return v[static_cast<std::size_t>(k)]; }
  int size() const { return static_cast<int>(v.size()); }
  bool compatible(const DomainGrid& g) const { return nx == g.nx && ny == g.ny; }
  bool compatible(const ScalarField& o) const { return nx == o.nx && ny == o.ny; }
};

inline void check_shape(const ScalarField& f, const DomainGrid& g) {
  require(f.compatible(g), ErrorCode::ShapeMismatch, "field shape does not match grid");
}

template <class Fn>
ScalarField sample(const DomainGrid& g, Fn&& fn) {
  ScalarField f(g);
  for (int k : g.domain_nodes) f[k] = fn(g.pos(k));
  return f;
}

inline ScalarField axpy(double a, const ScalarField& x, const ScalarField& y) {
  require(x.compatible(y), ErrorCode::ShapeMismatch, "field arithmetic across grids");
  ScalarField r = y;
  for (int k = 0; k < r.size(); ++k) r[k] += a * x[k];
  return r;
}

inline double max_abs(const DomainGrid& g, const ScalarField& f) {
  double m = 0.0;
  for (int k : g.domain_nodes) m = std::max(m, std::abs(f[k]));
  return m;
}

struct VectorField {
  ScalarField x;
  ScalarField y;
  Vec2 at(int k) const { return {x[k], y[k]}; }
};

/// Gradient from a least-squares quadratic (or, with few neighbours, linear)
/// fit over the domain nodes of the 5x5 block around (i, j). Used where an axis
/// has no three-point stencil, e.g. at isolated staircase tips of a disc.
inline Vec2 lsq_gradient(const DomainGrid& g, const std::vector<double>& f, int i, int j) {
  std::vector<std::array<double, 3>> pts;  // dx, dy, df in units of h
  const double f0 = f[static_cast<std::size_t>(g.index(i, j))];
  for (int dj = -2; dj <= 2; ++dj)
    for (int di = -2; di <= 2; ++di)
      if ((di || dj) && g.in_domain(i + di, j + dj))
        pts.push_back({double(di), double(dj), f[static_cast<std::size_t>(g.index(i + di, j + dj))] - f0});
  const int p = pts.size() >= 8 ? 5 : 2;
  Eigen::MatrixXd M(static_cast<Eigen::Index>(pts.size()), p);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t r = 0; r < pts.size(); ++r) {
    const double dx = pts[r][0], dy = pts[r][1];
    const auto row = static_cast<Eigen::Index>(r);
    M(row, 0) = dx;
    M(row, 1) = dy;
    if (p == 5) {
      M(row, 2) = 0.5 * dx * dx;
      M(row, 3) = dx * dy;
      M(row, 4) = 0.5 * dy * dy;
    }
    rhs[row] = pts[r][2];
  }
  require(pts.size() >= 2, ErrorCode::InvalidArgument, "node has too few neighbours for a gradient");
  const Eigen::VectorXd c = M.colPivHouseholderQr().solve(rhs);
  return {c[0] / g.h, c[1] / g.h};
}

/// First derivative along `axis` (0 = x, 1 = y) at node (i, j): centred when
/// both neighbours are in the domain, one-sided second order otherwise.
inline double first_derivative(const DomainGrid& g, const std::vector<double>& f, int i, int j,
                               int axis) {
  const int di = axis == 0 ? 1 : 0;
  const int dj = axis == 1 ? 1 : 0;
  auto in = [&](int s) { return g.in_domain(i + s * di, j + s * dj); };
  auto val = [&](int s) { return f[static_cast<std::size_t>(g.index(i + s * di, j + s * dj))]; };
  const double h = g.h;
  if (in(1) && in(-1)) return (val(1) - val(-1)) / (2.0 * h);
  if (in(1) && in(2)) return (-3.0 * val(0) + 4.0 * val(1) - val(2)) / (2.0 * h);
  if (in(-1) && in(-2)) return (3.0 * val(0) - 4.0 * val(-1) + val(-2)) / (2.0 * h);
  return lsq_gradient(g, f, i, j)[axis];
}

/// Second derivatives (xx, xy, yy) with centred stencils; NaN when the 3x3
/// stencil leaves the domain.
inline Sym2 centered_hessian(const DomainGrid& g, const std::vector<double>& f, int i, int j) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int dj = -1; dj <= 1; ++dj)
    for (int di = -1; di <= 1; ++di)
      if (!g.in_domain(i + di, j + dj)) return {nan, nan, nan};
  auto v = [&](int di, int dj) { return f[static_cast<std::size_t>(g.index(i + di, j + dj))]; };
  const double h2 = g.h * g.h;
  return {(v(1, 0) - 2.0 * v(0, 0) + v(-1, 0)) / h2,
          (v(1, 1) - v(1, -1) - v(-1, 1) + v(-1, -1)) / (4.0 * h2),
          (v(0, 1) - 2.0 * v(0, 0) + v(0, -1)) / h2};
}

inline VectorField gradient(const ScalarField& f, const DomainGrid& g) {
  check_shape(f, g);
  VectorField out{ScalarField(g), ScalarField(g)};
  for (int k : g.domain_nodes) {
    const int i = g.col(k), j = g.row(k);
    out.x[k] = first_derivative(g, f.v, i, j, 0);
    out.y[k] = first_derivative(g, f.v, i, j, 1);
  }
  return out;
}

/// Per-node centred Hessian; NaN entries where unavailable.
inline std::vector<Sym2> hessian(const ScalarField& f, const DomainGrid& g) {
  check_shape(f, g);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<Sym2> out(static_cast<std::size_t>(g.size()), Sym2{nan, nan, nan});
  for (int k : g.domain_nodes) out[static_cast<std::size_t>(k)] = centered_hessian(g, f.v, g.col(k), g.row(k));
  return out;
}

}  // namespace geowave
