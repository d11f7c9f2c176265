#pragma once

// JSON and CSV serialization of the library's value types. Doubles are
// written with 17 significant digits so files round-trip exactly and are
// byte-identical across runs with the same inputs.

#include <cctype>
#include <cstdio>
#include <ostream>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

#include "trilocal/behavior.hpp"
#include "trilocal/families.hpp"
#include "trilocal/inequalities.hpp"
#include "trilocal/model.hpp"
#include "trilocal/search.hpp"
#include "trilocal/w5.hpp"

namespace trilocal {

using json = nlohmann::json;

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Value types.

inline void to_json(json& j, const Correlators& c) { j = json{{"e1", c.e1}, {"e2", c.e2}, {"e3", c.e3}}; }

inline void from_json(const json& j, Correlators& c) {
  c.e1 = j.at("e1").get<double>();
  c.e2 = j.at("e2").get<double>();
  c.e3 = j.at("e3").get<double>();
}

inline void to_json(json& j, const Behavior& b) { j = json(b.p); }

inline void from_json(const json& j, Behavior& b) {
  if (!j.is_array() || j.size() != 8)
    throw Error(ErrorKind::InvalidInput, "behavior must be an array of 8 probabilities");
  for (std::size_t i = 0; i < 8; ++i) b.p[i] = j[i].get<double>();
}

inline json table_json(const Table<double>& t) {
  json rows = json::array();
  for (std::size_t i = 0; i < t.rows; ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < t.cols; ++k) row.push_back(t(i, k));
    rows.push_back(row);
  }
  return rows;
}

inline Table<double> table_from_json(const json& j, const char* name) {
  if (!j.is_array()) throw Error(ErrorKind::InvalidModel, std::string("table ") + name + " must be an array");
  const std::size_t r = j.size();
  const std::size_t c = r ? j[0].size() : 0;
  Table<double> t(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (!j[i].is_array() || j[i].size() != c)
      throw Error(ErrorKind::InvalidModel, std::string("table ") + name + " is ragged");
    for (std::size_t k = 0; k < c; ++k) t(i, k) = j[i][k].get<double>();
  }
  return t;
}

inline void to_json(json& j, const TriangleModel& m) {
  const auto c = m.cardinalities();
  j = json{{"card", {c[0], c[1], c[2]}},
           {"q", m.q},
           {"r", m.r},
           {"s", m.s},
           {"A", table_json(m.A)},
           {"B", table_json(m.B)},
           {"C", table_json(m.C)}};
}

inline void from_json(const json& j, TriangleModel& m) {
  m.q = j.at("q").get<std::vector<double>>();
  m.r = j.at("r").get<std::vector<double>>();
  m.s = j.at("s").get<std::vector<double>>();
  m.A = table_from_json(j.at("A"), "A");
  m.B = table_from_json(j.at("B"), "B");
  m.C = table_from_json(j.at("C"), "C");
}

inline void to_json(json& j, const FitError& e) { j = json{{"sse", e.sse}, {"rms", e.rms}}; }

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline void to_json(json& j, const IneqResult& r) {
  j = json{{"status", to_string(r.status)}, {"residual", optional_json(r.residual)}};
}

inline void to_json(json& j, const Verdict& v) {
  json passing = json::array();
  for (auto l : v.passing) passing.push_back(to_string(l));
  j = json{{"verdict", to_string(v.label)},
           {"nonlocal", v.nonlocal()},
           {"passing", passing},
           {"ghz", json::object()},
           {"w", v.w},
           {"wbar", v.wbar}};
  if (v.ghz.size() == 2) j["ghz"] = json{{"direct", v.ghz[0]}, {"relabeled", v.ghz[1]}};
}

// ---------------------------------------------------------------------------
// W5 solver.

namespace w5 {

inline void to_json(json& j, const W5Point& p) {
  j = json{{"x", p.x}, {"y", p.y}, {"z", p.z}, {"t", p.t}, {"u", p.u},
           {"v", p.v}, {"w", p.w}, {"k", p.k}, {"e3", p.e3}};
}

inline void to_json(json& j, const StationaryPoint& p) {
  j = json{{"x", p.x},
           {"z", p.z},
           {"e3", p.e3},
           {"stationarity", p.stationarity},
           {"k_residual", p.k_residual},
           {"feasible", p.feasible}};
}

inline void to_json(json& j, const W5Solution& s) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  j = json{{"status", to_string(s.status)},
           {"x", num(s.x)},
           {"z", num(s.z)},
           {"e3", num(s.e3)},
           {"stationarity_residual", num(s.stationarity_residual)},
           {"constraint_residual", num(s.constraint_residual)},
           {"point", s.point ? json(*s.point) : json(nullptr)},
           {"roots", s.roots}};
}

}  // namespace w5

// ---------------------------------------------------------------------------
// Search.

inline void to_json(json& j, const SearchConfig& c) {
  j = json{{"cards", {c.cards[0], c.cards[1], c.cards[2]}},
           {"restarts", c.restarts},
           {"max_iter", c.max_iter},
           {"sse_tol", c.sse_tol},
           {"pg_tol", c.pg_tol},
           {"stall_window", c.stall_window},
           {"stall_rel", c.stall_rel},
           {"seed", c.seed},
           {"local_threshold", c.local_threshold},
           {"early_stop_rms", c.early_stop_rms},
           {"threads", c.threads},
           {"allow_large_cardinality", c.allow_large_cardinality},
           {"method", to_string(c.method)},
           {"revive", c.revive}};
}

inline LocalMethod parse_method(const std::string& s) {
  if (s == to_string(LocalMethod::LevenbergMarquardt)) return LocalMethod::LevenbergMarquardt;
  if (s == to_string(LocalMethod::SpectralGradient)) return LocalMethod::SpectralGradient;
  throw Error(ErrorKind::InvalidInput, "unknown method '" + s + "'");
}

/// Overrides the fields present in `j`; unknown keys are rejected.
inline void apply_config(const json& j, SearchConfig& c) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidInput, "config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "cards") {
      const auto a = v.get<std::vector<std::size_t>>();
      if (a.size() != 3) throw Error(ErrorKind::InvalidInput, "cards needs three entries");
      c.cards = {a[0], a[1], a[2]};
    } else if (key == "restarts") {
      c.restarts = v.get<int>();
    } else if (key == "max_iter") {
      c.max_iter = v.get<int>();
    } else if (key == "sse_tol") {
      c.sse_tol = v.get<double>();
    } else if (key == "pg_tol") {
      c.pg_tol = v.get<double>();
    } else if (key == "stall_window") {
      c.stall_window = v.get<int>();
    } else if (key == "stall_rel") {
      c.stall_rel = v.get<double>();
    } else if (key == "seed") {
      c.seed = v.get<std::uint64_t>();
    } else if (key == "local_threshold") {
      c.local_threshold = v.get<double>();
    } else if (key == "early_stop_rms") {
      c.early_stop_rms = v.get<double>();
    } else if (key == "threads") {
      c.threads = v.get<unsigned>();
    } else if (key == "allow_large_cardinality") {
      c.allow_large_cardinality = v.get<bool>();
    } else if (key == "method") {
      c.method = parse_method(v.get<std::string>());
    } else if (key == "revive") {
      c.revive = v.get<bool>();
    } else {
      throw Error(ErrorKind::InvalidInput, "unknown config key '" + key + "'");
    }
  }
}

inline void to_json(json& j, const RestartSummary& r) {
  j = json{{"rms", r.rms}, {"iterations", r.iterations}, {"stop", to_string(r.reason)}};
}

/// Wall time is left out so that files are reproducible byte for byte.
inline void to_json(json& j, const SearchResult& r) {
  j = json{{"model", r.model}, {"error", r.error}, {"best_restart", r.best_restart},
           {"restarts", r.restarts}};
}

inline void to_json(json& j, const PlaneSpec& p) {
  if (const auto* ap = std::get_if<AnchorPlane>(&p)) {
    j = json{{"anchors", ap->anchors}};
  } else {
    const auto& cp = std::get<CoefficientPlane>(p);
    j = json{{"coefficients", cp.a}, {"c", cp.c}, {"lo", cp.lo}, {"hi", cp.hi}};
  }
}

inline void to_json(json& j, const ScanPoint& p) {
  j = json{{"e1", p.point.e1}, {"e2", p.point.e2}, {"e3", p.point.e3}, {"rms", p.rms}};
}

inline void to_json(json& j, const ScanReport& r) {
  j = json{{"plane", r.plane}, {"resolution", r.resolution}, {"config", r.config}, {"grid", r.grid}};
}

inline void to_json(json& j, const FamilyId& f) { j = to_string(f); }

inline json samples_json(FamilyId f, const std::vector<BoundarySample>& samples) {
  json pts = json::array();
  for (const auto& s : samples)
    pts.push_back(json{{"x", s.params.x}, {"y", s.params.y}, {"point", s.point}});
  return json{{"family", to_string(f)}, {"samples", pts}};
}

inline void to_json(json& j, const ValidationPoint& p) {
  j = json{{"x", p.params.x},
           {"y", p.params.y},
           {"original", p.original},
           {"displaced", p.displaced},
           {"original_rms", p.original_rms},
           {"displaced_rms", p.displaced_rms},
           {"displaced_fit", p.displaced_fit},
           {"fit_beyond_boundary", p.fit_beyond_boundary}};
}

inline void to_json(json& j, const ValidationReport& r) {
  j = json{{"family", r.family},
           {"displacement", r.displacement},
           {"config", r.config},
           {"violations", r.violations},
           {"displaced_below_threshold", r.displaced_below_threshold},
           {"original_fit_fraction", r.original_fit_fraction},
           {"median_original_rms", r.median_original_rms},
           {"median_displaced_rms", r.median_displaced_rms},
           {"median_log10_ratio", r.median_log10_ratio},
           {"points", r.points}};
}

// ---------------------------------------------------------------------------
// Plane descriptions.

/// Parses a linear equation in E1, E2, E3 such as "3E1+E3=0" or
/// "E1 - 2*E2 + E3 = 0" (case-insensitive).
inline CoefficientPlane parse_plane_equation(const std::string& text) {
  std::string s;
  for (char ch : text)
    if (!std::isspace(static_cast<unsigned char>(ch))) s += static_cast<char>(std::tolower(ch));
  const auto eq = s.find('=');
  if (eq == std::string::npos || s.find('=', eq + 1) != std::string::npos)
    throw Error(ErrorKind::InvalidInput, "plane equation needs exactly one '='");
  const std::string lhs = s.substr(0, eq);
  const std::string rhs = s.substr(eq + 1);
  CoefficientPlane p;
  try {
    std::size_t used = 0;
    p.c = std::stod(rhs, &used);
    if (used != rhs.size()) throw std::invalid_argument("trailing text");
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidInput, "plane right-hand side must be a number");
  }
  static const std::regex term(R"(([+-]?)([0-9]*\.?[0-9]*(?:e[+-]?[0-9]+)?)\*?e([123]))");
  std::size_t pos = 0;
  for (auto it = std::sregex_iterator(lhs.begin(), lhs.end(), term); it != std::sregex_iterator();
       ++it) {
    const auto& m = *it;
    if (static_cast<std::size_t>(m.position()) != pos || m.length() == 0)
      throw Error(ErrorKind::InvalidInput, "cannot parse plane equation '" + text + "'");
    pos += static_cast<std::size_t>(m.length());
    const double mag = m[2].str().empty() ? 1.0 : std::stod(m[2].str());
    p.a[static_cast<std::size_t>(m[3].str()[0] - '1')] += m[1].str() == "-" ? -mag : mag;
  }
  if (pos != lhs.size() || lhs.empty())
    throw Error(ErrorKind::InvalidInput, "cannot parse plane equation '" + text + "'");
  return p;
}

inline Correlators named_point(const std::string& name) {
  if (name == "U") return archetype::U;
  if (name == "GHZ") return archetype::GHZ;
  if (name == "W") return archetype::W;
  if (name == "Wbar") return archetype::Wbar;
  if (name == "Dplus") return archetype::Dplus;
  if (name == "Dminus") return archetype::Dminus;
  throw Error(ErrorKind::InvalidInput, "unknown archetype '" + name + "'");
}

/// Either "anchors:P,Q,R" with archetype names or a plane equation.
inline PlaneSpec parse_plane(const std::string& text) {
  const std::string prefix = "anchors:";
  if (text.rfind(prefix, 0) == 0) {
    std::vector<std::string> names;
    std::string cur;
    for (char ch : text.substr(prefix.size())) {
      if (ch == ',') {
        names.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    names.push_back(cur);
    if (names.size() != 3) throw Error(ErrorKind::InvalidInput, "anchors needs three names");
    AnchorPlane ap{{named_point(names[0]), named_point(names[1]), named_point(names[2])}};
    check_plane(ap);
    return ap;
  }
  PlaneSpec p = parse_plane_equation(text);
  check_plane(p);
  return p;
}

// ---------------------------------------------------------------------------
// CSV.

inline void write_scan_csv(std::ostream& os, const ScanReport& r) {
  os << "e1,e2,e3,rms\n";
  for (const auto& p : r.grid)
    os << format_double(p.point.e1) << ',' << format_double(p.point.e2) << ','
       << format_double(p.point.e3) << ',' << format_double(p.rms) << '\n';
}

inline void write_samples_csv(std::ostream& os, FamilyId f,
                              const std::vector<BoundarySample>& samples, bool header = true) {
  if (header) os << "family,x,y,e1,e2,e3\n";
  for (const auto& s : samples)
    os << to_string(f) << ',' << format_double(s.params.x) << ',' << format_double(s.params.y)
       << ',' << format_double(s.point.e1) << ',' << format_double(s.point.e2) << ','
       << format_double(s.point.e3) << '\n';
}

inline void write_validation_csv(std::ostream& os, const ValidationReport& r) {
  os << "x,y,e1,e2,e3,d1,d2,d3,original_rms,displaced_rms,fit_beyond_boundary\n";
  for (const auto& p : r.points)
    os << format_double(p.params.x) << ',' << format_double(p.params.y) << ','
       << format_double(p.original.e1) << ',' << format_double(p.original.e2) << ','
       << format_double(p.original.e3) << ',' << format_double(p.displaced.e1) << ','
       << format_double(p.displaced.e2) << ',' << format_double(p.displaced.e3) << ','
       << format_double(p.original_rms) << ',' << format_double(p.displaced_rms) << ','
       << (p.fit_beyond_boundary ? 1 : 0) << '\n';
}

}  // namespace trilocal
