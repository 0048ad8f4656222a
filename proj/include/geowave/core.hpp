// Small value types shared by every geowave module.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace geowave {

enum class ErrorCode {
  InvalidArgument,
  ShapeMismatch,
  NotSpd,
  NotConverged,
  CflViolation,
  BlowUp,
  NonFinite,
  Io,
  Config,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::ShapeMismatch: return "shape_mismatch";
    case ErrorCode::NotSpd: return "not_spd";
    case ErrorCode::NotConverged: return "not_converged";
    case ErrorCode::CflViolation: return "cfl_violation";
    case ErrorCode::BlowUp: return "blow_up";
    case ErrorCode::NonFinite: return "non_finite";
    case ErrorCode::Io: return "io";
    case ErrorCode::Config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) throw Error(code, msg);
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm2() const { return x * x + y * y; }
  double norm() const { return std::sqrt(norm2()); }
  double operator[](int i) const { return i == 0 ? x : y; }
};

/// Symmetric 2x2 matrix [[xx, xy], [xy, yy]].
struct Sym2 {
  double xx = 0.0;
  double xy = 0.0;
  double yy = 0.0;

  static Sym2 identity(double s = 1.0) { return {s, 0.0, s}; }

  double operator()(int i, int j) const {
    if (i == 0 && j == 0) return xx;
    if (i == 1 && j == 1) return yy;
    return xy;
  }
  double det() const { return xx * yy - xy * xy; }
  double trace() const { return xx + yy; }
  Sym2 inverse() const {
    const double d = det();
    return {yy / d, -xy / d, xx / d};
  }
  Vec2 apply(Vec2 v) const { return {xx * v.x + xy * v.y, xy * v.x + yy * v.y}; }
  double quad(Vec2 v) const { return v.x * (xx * v.x + xy * v.y) + v.y * (xy * v.x + yy * v.y); }

  std::array<double, 2> eigenvalues() const {
    const double m = 0.5 * (xx + yy);
    const double r = std::hypot(0.5 * (xx - yy), xy);
    return {m - r, m + r};
  }
  double min_eig() const { return eigenvalues()[0]; }
  double max_eig() const { return eigenvalues()[1]; }

  friend Sym2 operator+(Sym2 a, Sym2 b) { return {a.xx + b.xx, a.xy + b.xy, a.yy + b.yy}; }
  friend Sym2 operator-(Sym2 a, Sym2 b) { return {a.xx - b.xx, a.xy - b.xy, a.yy - b.yy}; }
  friend Sym2 operator*(double s, Sym2 a) { return {s * a.xx, s * a.xy, s * a.yy}; }
};

/// Product of two symmetric matrices (not symmetric in general), returned row-major.
inline std::array<double, 4> mul(const Sym2& a, const Sym2& b) {
  return {a.xx * b.xx + a.xy * b.xy, a.xx * b.xy + a.xy * b.yy,
          a.xy * b.xx + a.yy * b.xy, a.xy * b.xy + a.yy * b.yy};
}

/// Smallest generalized eigenvalue of the pencil (h, g), g SPD.
inline double min_generalized_eig(const Sym2& h, const Sym2& g) {
  // det(h - l g) = 0  ->  det(g) l^2 - (h.xx g.yy + h.yy g.xx - 2 h.xy g.xy) l + det(h) = 0
  const double a = g.det();
  const double b = -(h.xx * g.yy + h.yy * g.xx - 2.0 * h.xy * g.xy);
  const double c = h.det();
  const double disc = std::max(0.0, b * b - 4.0 * a * c);
  return (-b - std::sqrt(disc)) / (2.0 * a);
}

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace geowave
