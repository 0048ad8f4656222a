// Text serialization: field, control and energy CSVs, JSON for grid specs,
// coefficient models and the result types. Needs nlohmann/json on the include path.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "geowave/equilibria.hpp"
#include "geowave/geometry.hpp"
#include "geowave/hum.hpp"
#include "geowave/steer.hpp"
#include "geowave/wavesim.hpp"

namespace geowave::io {

using json = nlohmann::json;

/// 17 significant digits, enough to round-trip a double.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot open " + p.string() + " for writing");
  out << text;
  require(static_cast<bool>(out), ErrorCode::Io, "write to " + p.string() + " failed");
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_json(const std::filesystem::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

inline json read_json(const std::filesystem::path& p) {
  try {
    return json::parse(read_text(p));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, p.string() + ": " + e.what());
  }
}

/// NaN and infinities have no JSON spelling; they become null.
inline json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
inline json num(const std::optional<double>& v) { return v ? num(*v) : json(nullptr); }

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used > 0 && used == s.size(), ErrorCode::Config, "cannot parse " + what + " from '" + s + "'");
  return v;
}

// ---------------------------------------------------------------------------
// Grid and model

inline Edge edge_from_string(const std::string& s) {
  if (s == "left") return Edge::Left;
  if (s == "right") return Edge::Right;
  if (s == "bottom") return Edge::Bottom;
  if (s == "top") return Edge::Top;
  throw Error(ErrorCode::Config, "unknown edge '" + s + "'");
}

inline json to_json(const GridSpec& s) {
  json j;
  j["shape"] = to_string(s.shape);
  j["h"] = s.h;
  if (s.shape == ShapeKind::Rectangle) {
    j["xmin"] = s.xmin;
    j["xmax"] = s.xmax;
    j["ymin"] = s.ymin;
    j["ymax"] = s.ymax;
  } else {
    j["center"] = {s.center.x, s.center.y};
    j["radius"] = s.radius;
  }
  j["gamma1_edges"] = json::array();
  for (Edge e : s.gamma1_edges) j["gamma1_edges"].push_back(to_string(e));
  j["gamma1_arcs"] = json::array();
  for (const auto& [a, b] : s.gamma1_arcs) j["gamma1_arcs"].push_back({a, b});
  return j;
}

inline GridSpec grid_spec_from_json(const json& j) {
  try {
    GridSpec s;
    const std::string shape = j.value("shape", std::string("rectangle"));
    require(shape == "rectangle" || shape == "disc", ErrorCode::Config, "unknown shape '" + shape + "'");
    s.shape = shape == "disc" ? ShapeKind::Disc : ShapeKind::Rectangle;
    s.h = j.at("h").get<double>();
    s.xmin = j.value("xmin", 0.0);
    s.xmax = j.value("xmax", 1.0);
    s.ymin = j.value("ymin", 0.0);
    s.ymax = j.value("ymax", 1.0);
    if (j.contains("center")) s.center = {j["center"].at(0).get<double>(), j["center"].at(1).get<double>()};
    s.radius = j.value("radius", 1.0);
    for (const auto& e : j.value("gamma1_edges", json::array())) s.gamma1_edges.push_back(edge_from_string(e));
    for (const auto& a : j.value("gamma1_arcs", json::array()))
      s.gamma1_arcs.emplace_back(a.at(0).get<double>(), a.at(1).get<double>());
    require(s.h > 0.0, ErrorCode::Config, "grid spacing must be positive");
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("grid spec: ") + e.what());
  }
}

/// Shape, spacing and boundary partition of a built grid.
inline json grid_header(const DomainGrid& g) {
  json j = to_json(g.spec);
  j["nx"] = g.nx;
  j["ny"] = g.ny;
  j["origin"] = {g.origin.x, g.origin.y};
  j["domain_nodes"] = g.domain_nodes.size();
  j["interior_nodes"] = g.interior_nodes.size();
  j["gamma0_nodes"] = g.gamma0_nodes.size();
  j["gamma1_nodes"] = g.gamma1_nodes.size();
  return j;
}

inline json poly_to_json(const Poly4& p) {
  json a = json::array();
  for (const auto& t : p.terms) a.push_back({{"c", t.c}, {"x1", t.px1}, {"x2", t.px2}, {"y1", t.py1}, {"y2", t.py2}});
  return a;
}

inline Poly4 poly_from_json(const json& a) {
  Poly4 p;
  for (const auto& t : a)
    p.terms.push_back({t.at("c").get<double>(), t.value("x1", 0), t.value("x2", 0), t.value("y1", 0), t.value("y2", 0)});
  return p;
}

inline json to_json(const CoefficientModel& m) {
  json j;
  j["family"] = to_string(m.family());
  json params = json::object();
  if (m.family() == Family::Const) {
    const Sym2& a = m.const_matrix();
    params = {{"a11", a.xx}, {"a12", a.xy}, {"a22", a.yy}};
  } else if (m.family() == Family::Poly) {
    params = {{"a11", poly_to_json(m.poly_a11())},
              {"a12", poly_to_json(m.poly_a12())},
              {"a22", poly_to_json(m.poly_a22())},
              {"b", poly_to_json(m.poly_b())}};
  }
  j["params"] = params;
  return j;
}

inline CoefficientModel model_from_json(const json& j) {
  try {
    const Family f = family_from_string(j.at("family").get<std::string>());
    const json params = j.value("params", json::object());
    switch (f) {
      case Family::IsoPlus: return CoefficientModel::iso_plus();
      case Family::IsoInv: return CoefficientModel::iso_inv();
      case Family::DivIso: return CoefficientModel::div_iso();
      case Family::Const: {
        const Sym2 a{params.value("a11", 1.0), params.value("a12", 0.0), params.value("a22", 1.0)};
        require(a.xx > 0.0 && a.det() > 0.0, ErrorCode::Config, "constant coefficient matrix is not positive definite");
        return CoefficientModel::constant(a);
      }
      case Family::Poly:
        return CoefficientModel::poly(poly_from_json(params.value("a11", json::array())),
                                      poly_from_json(params.value("a12", json::array())),
                                      poly_from_json(params.value("a22", json::array())),
                                      poly_from_json(params.value("b", json::array())));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("coefficient model: ") + e.what());
  }
  throw Error(ErrorCode::Config, "coefficient model: unreachable family");
}

// ---------------------------------------------------------------------------
// Fields

/// One row per domain node: i,j,x,y,value.
inline std::string field_csv(const DomainGrid& g, const ScalarField& f) {
  check_shape(f, g);
  std::string s = "i,j,x,y,value\n";
  for (int k : g.domain_nodes) {
    const Vec2 p = g.pos(k);
    s += std::to_string(g.col(k)) + "," + std::to_string(g.row(k)) + "," + fmt(p.x) + "," + fmt(p.y) + "," +
         fmt(f[k]) + "\n";
  }
  return s;
}

inline void write_field_csv(const std::filesystem::path& p, const DomainGrid& g, const ScalarField& f) {
  write_text(p, field_csv(g, f));
}

/// Reads the i,j,value columns; every domain node must be present.
inline ScalarField read_field_csv(const std::filesystem::path& p, const DomainGrid& g) {
  std::istringstream in(read_text(p));
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::Io, p.string() + ": empty file");
  const auto head = split(line, ',');
  int ci = -1, cj = -1, cv = -1;
  for (std::size_t c = 0; c < head.size(); ++c) {
    if (head[c] == "i") ci = static_cast<int>(c);
    if (head[c] == "j") cj = static_cast<int>(c);
    if (head[c] == "value") cv = static_cast<int>(c);
  }
  require(ci >= 0 && cj >= 0 && cv >= 0, ErrorCode::Io, p.string() + ": header must name i, j and value");
  ScalarField f(g);
  std::vector<char> seen(static_cast<std::size_t>(g.size()), 0);
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    require(cells.size() == head.size(), ErrorCode::Io, p.string() + ": row " + std::to_string(row) + " is malformed");
    const int i = std::stoi(cells[static_cast<std::size_t>(ci)]);
    const int j = std::stoi(cells[static_cast<std::size_t>(cj)]);
    require(g.in_domain(i, j), ErrorCode::ShapeMismatch,
            p.string() + ": node (" + std::to_string(i) + "," + std::to_string(j) + ") is not in the grid");
    const int k = g.index(i, j);
    f[k] = parse_double(cells[static_cast<std::size_t>(cv)], "field value");
    seen[static_cast<std::size_t>(k)] = 1;
  }
  for (int k : g.domain_nodes)
    require(seen[static_cast<std::size_t>(k)] != 0, ErrorCode::ShapeMismatch, p.string() + ": missing domain nodes");
  return f;
}

// ---------------------------------------------------------------------------
// Controls and energy traces

/// Time-major: a header "t,n<k>..." naming the grid index of each controlled
/// node, then one row per time level.
inline std::string control_csv(const ControlSignal& c) {
  c.check();
  std::string s = "t";
  for (int k : c.nodes) s += ",n" + std::to_string(k);
  s += "\n";
  for (int n = 0; n < c.time.levels(); ++n) {
    s += fmt(c.time.t(n));
    for (int b = 0; b < c.m(); ++b) s += "," + fmt(c.values(n, b));
    s += "\n";
  }
  return s;
}

inline void write_control_csv(const std::filesystem::path& p, const ControlSignal& c) { write_text(p, control_csv(c)); }

/// The rows must sit on a uniform time grid starting at 0.
inline ControlSignal read_control_csv(const std::filesystem::path& p, ControlKind kind) {
  std::istringstream in(read_text(p));
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::Io, p.string() + ": empty file");
  const auto head = split(line, ',');
  require(!head.empty() && head[0] == "t", ErrorCode::Io, p.string() + ": first column must be t");
  ControlSignal c;
  c.kind = kind;
  for (std::size_t b = 1; b < head.size(); ++b) {
    require(head[b].size() > 1 && head[b][0] == 'n', ErrorCode::Io, p.string() + ": bad column '" + head[b] + "'");
    c.nodes.push_back(std::stoi(head[b].substr(1)));
  }
  std::vector<double> ts;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    require(cells.size() == head.size(), ErrorCode::Io, p.string() + ": malformed row");
    ts.push_back(parse_double(cells[0], "time"));
    std::vector<double> r;
    for (std::size_t b = 1; b < cells.size(); ++b) r.push_back(parse_double(cells[b], "control value"));
    rows.push_back(std::move(r));
  }
  require(ts.size() >= 2 && ts.front() == 0.0, ErrorCode::Io, p.string() + ": need at least two rows from t = 0");
  const int steps = static_cast<int>(ts.size()) - 1;
  c.time.T = ts.back();
  c.time.steps = steps;
  c.time.dt = c.time.T / steps;
  for (int n = 0; n <= steps; ++n)
    require(std::abs(ts[static_cast<std::size_t>(n)] - c.time.t(n)) <= 1e-9 * std::max(1.0, c.time.T), ErrorCode::Io,
            p.string() + ": time levels are not uniform");
  c.values.resize(steps + 1, c.m());
  for (int n = 0; n <= steps; ++n)
    for (int b = 0; b < c.m(); ++b) c.values(n, b) = rows[static_cast<std::size_t>(n)][static_cast<std::size_t>(b)];
  c.check();
  return c;
}

inline std::string energy_csv(const EnergyTrace& e) {
  std::string s = "t,e_lin,q_surrogate,e_surrogate,e_gamma,q_gamma\n";
  for (const auto& x : e.samples)
    s += fmt(x.t) + "," + fmt(x.e_lin) + "," + fmt(x.q_surrogate) + "," + fmt(x.e_surrogate) + "," + fmt(x.e_gamma) +
         "," + fmt(x.q_gamma) + "\n";
  return s;
}

inline std::string series_csv(const std::string& name, const std::vector<double>& v) {
  std::string s = "index," + name + "\n";
  for (std::size_t i = 0; i < v.size(); ++i) s += std::to_string(i) + "," + fmt(v[i]) + "\n";
  return s;
}

// ---------------------------------------------------------------------------
// Result types

inline json to_json(const ControllabilityReport& r) {
  json j;
  j["verdict"] = r.controllable ? "controllable" : "not_controllable";
  j["kappa"] = num(r.kappa);
  j["lambda"] = num(r.lambda);
  j["rho0"] = num(r.rho0);
  j["sup_rho"] = num(r.sup_rho);
  j["T0"] = num(r.T0);
  j["center"] = {r.center.x, r.center.y};
  j["ball_radius"] = num(r.ball_radius);
  j["domain_radius"] = num(r.domain_radius);
  j["equilibrium_residual"] = num(r.residual);
  j["max_gamma1_normal_derivative"] = num(r.max_gamma1_normal_derivative);
  j["kappa_nonpositive"] = r.kappa_nonpositive;
  j["ball_criterion"] = r.ball_criterion;
  j["hessian_criterion"] = r.hessian_criterion;
  j["gamma1_sign_condition"] = r.gamma1_sign_condition;
  j["excluded_nodes"] = r.excluded_nodes;
  j["excluded_fraction"] = num(r.excluded_fraction);
  j["sweeps"] = r.sweeps;
  j["warnings"] = r.warnings;
  return j;
}

inline json to_json(const EquilibriumSolution& s) {
  return {{"converged", s.converged}, {"residual", num(s.residual)}, {"newton_iterations", s.newton_iters}};
}

inline json to_json(const HumSolveResult& r) {
  json j;
  j["converged"] = r.converged;
  j["stagnated"] = r.stagnated;
  j["diagnostic"] = r.diagnostic;
  j["iterations"] = r.iterations;
  j["initial_energy"] = num(r.initial_energy);
  j["terminal_energy"] = num(r.terminal_energy);
  j["energy_ratio"] = num(r.initial_energy > 0.0 ? r.terminal_energy / r.initial_energy : 0.0);
  j["gram_value"] = num(r.gram_value);
  j["residual_history"] = r.residual_history;
  return j;
}

inline json to_json(const ProbeResult& r) {
  json j;
  j["c1_hat"] = num(r.c1_hat);
  j["c2_hat"] = num(r.c2_hat);
  j["ratio"] = num(r.c1_hat > 0.0 ? r.c2_hat / r.c1_hat : std::numeric_limits<double>::infinity());
  j["values"] = r.values;
  j["psi_star"] = r.psi_star;
  j["adversarial_value"] = num(r.adversarial_value);
  return j;
}

inline json to_json(const QuasilinearResult& r, double initial_e_lin) {
  json j;
  j["completed"] = r.completed;
  j["blew_up"] = r.blew_up;
  j["blowup_time"] = num(r.blowup_time);
  j["diagnostic"] = r.diagnostic;
  j["substeps"] = r.substeps;
  j["max_lambda"] = num(r.max_lambda);
  j["initial_e_lin"] = num(initial_e_lin);
  j["max_e_lin"] = num(r.energy.max_e_lin());
  j["e_lin_growth"] = num(initial_e_lin > 0.0 ? r.energy.max_e_lin() / initial_e_lin : 0.0);
  j["monitor_holds"] = r.energy.monitor_holds();
  j["max_monitor_ratio"] = num(r.energy.max_ratio());
  j["energy_samples"] = r.energy.samples.size();
  return j;
}

inline json to_json(const LegRecord& l) {
  json j;
  j["accepted"] = l.accepted;
  j["diverged"] = l.diverged;
  j["outer_iterations"] = l.outer_iterations;
  j["krylov_iterations"] = l.krylov_iterations;
  j["errors"] = l.errors;
  j["achieved_error"] = num(l.achieved_error);
  j["verified_error"] = num(l.verified_error);
  j["move_energy"] = num(l.move_energy);
  j["diagnostic"] = l.diagnostic;
  return j;
}

inline json to_json(const SteeringPlan& p) {
  json j;
  j["completed"] = p.completed;
  j["geometry_ok"] = p.geometry_ok;
  j["failure"] = p.failure;
  j["final_error"] = num(p.final_error);
  j["waypoints"] = json::array();
  for (const auto& w : p.waypoints)
    j["waypoints"].push_back(
        {{"family", w.family}, {"alpha", w.alpha}, {"controllable", w.controllable}, {"T0", num(w.T0)}});
  j["legs"] = json::array();
  for (const auto& l : p.legs) j["legs"].push_back(to_json(l));
  return j;
}

}  // namespace geowave::io
