// Closed-form coefficient families A(x, y), b(x, y) and their y-derivatives.
#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "geowave/core.hpp"

namespace geowave {

enum class Family { IsoPlus, IsoInv, Const, DivIso, Poly };
enum class Form { Dirichlet, Divergence };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::IsoPlus: return "iso_plus";
    case Family::IsoInv: return "iso_inv";
    case Family::Const: return "const";
    case Family::DivIso: return "div_iso";
    case Family::Poly: return "poly";
  }
  return "?";
}

inline Family family_from_string(const std::string& s) {
  if (s == "iso_plus") return Family::IsoPlus;
  if (s == "iso_inv") return Family::IsoInv;
  if (s == "const") return Family::Const;
  if (s == "div_iso") return Family::DivIso;
  if (s == "poly") return Family::Poly;
  throw Error(ErrorCode::Config, "unknown coefficient family '" + s + "'");
}

/// One monomial c * x1^p1 x2^p2 y1^q1 y2^q2.
struct Monomial {
  double c = 0.0;
  int px1 = 0, px2 = 0, py1 = 0, py2 = 0;
};

/// Polynomial in (x1, x2, y1, y2).
struct Poly4 {
  std::vector<Monomial> terms;

  double operator()(Vec2 x, Vec2 y) const {
    double s = 0.0;
    for (const auto& t : terms) s += t.c * ipow(x.x, t.px1) * ipow(x.y, t.px2) * ipow(y.x, t.py1) * ipow(y.y, t.py2);
    return s;
  }
  /// Partial derivative with respect to y_l (l = 0, 1).
  double dy(Vec2 x, Vec2 y, int l) const {
    double s = 0.0;
    for (const auto& t : terms) {
      const int q = l == 0 ? t.py1 : t.py2;
      if (q == 0) continue;
      const double base = t.c * q * ipow(x.x, t.px1) * ipow(x.y, t.px2);
      s += l == 0 ? base * ipow(y.x, t.py1 - 1) * ipow(y.y, t.py2)
                  : base * ipow(y.x, t.py1) * ipow(y.y, t.py2 - 1);
    }
    return s;
  }
  bool empty() const { return terms.empty(); }

  static double ipow(double v, int p) {
    double r = 1.0;
    for (int i = 0; i < p; ++i) r *= v;
    return r;
  }
};

/// Coefficients of the quasilinear operator. Divergence-form families are
/// also exposed in Dirichlet form through A = d a / dy and b = div_x a.
class CoefficientModel {
 public:
  CoefficientModel() = default;

  static CoefficientModel iso_plus() { return CoefficientModel(Family::IsoPlus); }
  static CoefficientModel iso_inv() { return CoefficientModel(Family::IsoInv); }
  static CoefficientModel div_iso() { return CoefficientModel(Family::DivIso); }
  static CoefficientModel constant(const Sym2& a) {
    CoefficientModel m(Family::Const);
    m.a_const_ = a;
    return m;
  }
  static CoefficientModel poly(Poly4 a11, Poly4 a12, Poly4 a22, Poly4 b) {
    CoefficientModel m(Family::Poly);
    m.p11_ = std::move(a11);
    m.p12_ = std::move(a12);
    m.p22_ = std::move(a22);
    m.pb_ = std::move(b);
    return m;
  }

  Family family() const { return family_; }
  Form form() const { return family_ == Family::DivIso ? Form::Divergence : Form::Dirichlet; }
  /// True if the model admits a flux vector a(x, y) with A = d a / dy.
  bool has_flux() const { return family_ == Family::DivIso || family_ == Family::Const; }
  const Sym2& const_matrix() const { return a_const_; }
  const Poly4& poly_a11() const { return p11_; }
  const Poly4& poly_a12() const { return p12_; }
  const Poly4& poly_a22() const { return p22_; }
  const Poly4& poly_b() const { return pb_; }

  Sym2 A(Vec2 x, Vec2 y) const {
    const double s = y.norm2();
    switch (family_) {
      case Family::IsoPlus: return Sym2::identity(1.0 + s);
      case Family::IsoInv: return Sym2::identity(1.0 / (1.0 + s));
      case Family::Const: return a_const_;
      case Family::DivIso: return {1.0 + s + 2.0 * y.x * y.x, 2.0 * y.x * y.y, 1.0 + s + 2.0 * y.y * y.y};
      case Family::Poly: return {p11_(x, y), p12_(x, y), p22_(x, y)};
    }
    return {};
  }

  double b(Vec2 x, Vec2 y) const { return family_ == Family::Poly ? pb_(x, y) : 0.0; }

  /// dA/dy_l for l = 0, 1.
  std::array<Sym2, 2> dA(Vec2 x, Vec2 y) const {
    switch (family_) {
      case Family::IsoPlus: return {Sym2::identity(2.0 * y.x), Sym2::identity(2.0 * y.y)};
      case Family::IsoInv: {
        const double d = 1.0 + y.norm2();
        const double f = -2.0 / (d * d);
        return {Sym2::identity(f * y.x), Sym2::identity(f * y.y)};
      }
      case Family::Const: return {Sym2{0, 0, 0}, Sym2{0, 0, 0}};
      case Family::DivIso:
        // d/dy_l [(1+|y|^2) delta_ij + 2 y_i y_j]
        return {Sym2{6.0 * y.x, 2.0 * y.y, 2.0 * y.x}, Sym2{2.0 * y.y, 2.0 * y.x, 6.0 * y.y}};
      case Family::Poly:
        return {Sym2{p11_.dy(x, y, 0), p12_.dy(x, y, 0), p22_.dy(x, y, 0)},
                Sym2{p11_.dy(x, y, 1), p12_.dy(x, y, 1), p22_.dy(x, y, 1)}};
    }
    return {};
  }

  Vec2 db(Vec2 x, Vec2 y) const {
    if (family_ != Family::Poly) return {0.0, 0.0};
    return {pb_.dy(x, y, 0), pb_.dy(x, y, 1)};
  }

  /// Flux vector a(x, y); only for models with has_flux().
  Vec2 flux(Vec2 /*x*/, Vec2 y) const {
    require(has_flux(), ErrorCode::InvalidArgument,
            std::string("family '") + to_string(family_) + "' has no divergence-form flux");
    if (family_ == Family::Const) return a_const_.apply(y);
    return (1.0 + y.norm2()) * y;
  }

 private:
  explicit CoefficientModel(Family f) : family_(f) {}

  Family family_ = Family::IsoPlus;
  Sym2 a_const_ = Sym2::identity();
  Poly4 p11_, p12_, p22_, pb_;
};

struct ModelValidation {
  double min_eig = 0.0;
  double max_b_at_zero = 0.0;
  double max_flux_at_zero = 0.0;
  bool spd = false;
  bool ok = false;
};

/// Probes A(x, y) > 0, b(x, 0) = 0 and a(x, 0) = 0 over the given points x and a
/// 10x10 lattice of y in [-ylim, ylim]^2.
inline ModelValidation validate_model(const CoefficientModel& m, const std::vector<Vec2>& xs,
                                      double ylim = 2.0) {
  ModelValidation r;
  r.min_eig = std::numeric_limits<double>::infinity();
  for (const Vec2& x : xs) {
    for (int a = 0; a < 10; ++a)
      for (int c = 0; c < 10; ++c) {
        const Vec2 y{-ylim + 2.0 * ylim * a / 9.0, -ylim + 2.0 * ylim * c / 9.0};
        r.min_eig = std::min(r.min_eig, m.A(x, y).min_eig());
      }
    r.max_b_at_zero = std::max(r.max_b_at_zero, std::abs(m.b(x, {0, 0})));
    if (m.has_flux()) r.max_flux_at_zero = std::max(r.max_flux_at_zero, m.flux(x, {0, 0}).norm());
  }
  r.spd = r.min_eig > 0.0;
  r.ok = r.spd && r.max_b_at_zero <= 1e-14 && r.max_flux_at_zero <= 1e-14;
  return r;
}

inline void require_valid(const CoefficientModel& m, const std::vector<Vec2>& xs) {
  const auto v = validate_model(m, xs);
  require(v.spd, ErrorCode::NotSpd, "coefficient matrix A is not positive definite on the probe set");
  require(v.ok, ErrorCode::InvalidArgument, "coefficients do not vanish at zero gradient");
}

}  // namespace geowave
