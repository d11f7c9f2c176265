#pragma once

// Two-parameter families of explicit triangle-local models whose correlators
// trace pieces of the local set's boundary.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trilocal/behavior.hpp"
#include "trilocal/error.hpp"
#include "trilocal/model.hpp"
#include "trilocal/rng.hpp"
#include "trilocal/roots.hpp"
#include "trilocal/w5.hpp"

namespace trilocal {

enum class FamilyKind { GHZ, W1, W2, W3, W4, W5 };

struct FamilyId {
  FamilyKind kind = FamilyKind::GHZ;
  bool flipped = false;  // all responses replaced by 1 - response

  friend bool operator==(const FamilyId&, const FamilyId&) = default;
};

/// Family parameters; for W5 these are (E1, E2).
struct FamilyParams {
  double x = 0;
  double y = 0;
};

inline constexpr std::array<FamilyKind, 6> kAllFamilies{FamilyKind::GHZ, FamilyKind::W1,
                                                        FamilyKind::W2,  FamilyKind::W3,
                                                        FamilyKind::W4,  FamilyKind::W5};

inline const char* to_string(FamilyKind k) {
  switch (k) {
    case FamilyKind::GHZ: return "ghz";
    case FamilyKind::W1: return "w1";
    case FamilyKind::W2: return "w2";
    case FamilyKind::W3: return "w3";
    case FamilyKind::W4: return "w4";
    case FamilyKind::W5: return "w5";
  }
  return "?";
}

inline std::string to_string(const FamilyId& f) {
  return std::string(to_string(f.kind)) + (f.flipped ? "-flipped" : "");
}

/// Parses "ghz", "w1" ... "w5", optionally suffixed with "-flipped".
inline FamilyId parse_family(std::string_view s) {
  FamilyId f;
  constexpr std::string_view suffix = "-flipped";
  if (s.size() > suffix.size() && s.substr(s.size() - suffix.size()) == suffix) {
    f.flipped = true;
    s.remove_suffix(suffix.size());
  }
  for (FamilyKind k : kAllFamilies) {
    if (s == to_string(k)) {
      f.kind = k;
      return f;
    }
  }
  throw Error(ErrorKind::InvalidInput, "unknown family '" + std::string(s) + "'");
}

namespace family_detail {

inline constexpr double kEdge = 1e-10;  // margin to edges where denominators vanish
inline constexpr double kEntryTol = 1e-9;

inline bool finite_all(std::initializer_list<double> xs) {
  for (double v : xs)
    if (!std::isfinite(v)) return false;
  return true;
}

inline bool in_unit(double v) { return v >= -kEntryTol && v <= 1 + kEntryTol; }

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Derived entries of each family. nullopt where a denominator vanishes.

struct W1Entries { double z, t; };
inline std::optional<W1Entries> w1_entries(double x, double y) {
  const double dz = y * y * (1 - 2 * x);
  const double dt = 1 - 2 * x - 2 * y + 4 * x * y + y * y - 2 * x * y * y;
  if (std::abs(dz) < kEdge || std::abs(dt) < kEdge) return std::nullopt;
  return W1Entries{(2 * x * x * y - x * x - 4 * x * y * y + x * y + 2 * y * y - y) / dz,
                   x * (1 - x - y + 2 * x * y) / dt};
}

struct W2Entries { double z, t; };
inline std::optional<W2Entries> w2_entries(double x, double y) {
  const double den = 1 - 4 * x + 6 * x * x - 4 * x * x * x - x * y + x * x * y + x * x * x * y;
  if (std::abs(den) < kEdge) return std::nullopt;
  const double xm1 = x - 1;
  return W2Entries{xm1 * xm1 * xm1 * x / den, xm1 * x * x * x * (1 - y) / den};
}

struct W3Entries { double z, t, u; };
inline std::optional<W3Entries> w3_entries(double x, double y) {
  const double d = x - x * x - 2 * y + 4 * x * y - x * x * y + x * y * y;
  const double dz = (x - y) * (1 - y);
  const double dt = 4 * x * x * y * (x - y);
  const double du = 4 * y * d * d;
  if (std::abs(dz) < kEdge || std::abs(dt) < kEdge || std::abs(y * d) < kEdge) return std::nullopt;
  const double omx = 1 - x;
  return W3Entries{
      d / dz, (x - 4 * omx * omx * omx * y + (3 - 4 * x) * x * y * y) / dt,
      (x - y) * (1 - y) * (1 - y) *
          (4 * y * (1 + x * x + x * x * x - x * x * y) - x - x * y * (10 + y)) / du};
}

struct W4Entries { double z, t, u, v; };
inline std::optional<W4Entries> w4_entries(double x, double y) {
  const double x2 = x * x, x3 = x2 * x, x4 = x3 * x, y2 = y * y, y3 = y2 * y;
  const double a2 = (1 - y) * (1 - y) * (1 - x + x2 * y) * (1 - x + x * y + x * y2);
  const double a1 = -(1 - y) * (x - 2 * x2 + x3 - 2 * y + 5 * x * y - 3 * x2 * y + x3 * y -
                                x4 * y - x2 * y2 + x3 * y2 + x4 * y2 + x2 * y3 - x3 * y3);
  const double a0 = -(1 - x) * (x - y) * y * (1 - x + x * y);
  if (std::abs(a2) < kEdge) return std::nullopt;
  double disc = a1 * a1 - 4 * a2 * a0;
  if (disc < 0) {
    if (disc < -1e-14) return std::nullopt;
    disc = 0;  // double root
  }
  const double sq = std::sqrt(disc);
  const double z = std::max((-a1 + sq) / (2 * a2), (-a1 - sq) / (2 * a2));
  const double d1 = 1 - x + y;
  const double d2 = 1 - x + x * y;
  if (std::abs(d1) < kEdge || std::abs(d2) < kEdge || std::abs(1 - y) < kEdge)
    return std::nullopt;
  const double t = (1 - 2 * z - x + 2 * x * z - x * y2 * z) / d1;
  const double u = (1 - y) *
                   (1 - z - x + x * z + y * z + x * y - x * y * z - x2 * y * z + x2 * y2 * z) /
                   (d1 * d2);
  return W4Entries{z, t, u, y / (1 - y) * u};
}

inline TriangleModel ghz_model_raw(double x, double y) {
  TriangleModel m;
  m.q = {x, y, 1 - x - y};
  m.r = m.q;
  m.s = m.q;
  const Table<double> f{{0, 1, 0}, {1, 1, 0}, {0, 0, 0}};
  m.A = f;
  m.B = f;
  m.C = f;
  return m;
}

}  // namespace family_detail

// ---------------------------------------------------------------------------
// Domain bounds.

/// Smallest real root of 9x^4 - 24x^3 + 24x^2 - 9x + 1, the upper end of the
/// W1 x-range.
inline double x_max_w1() {
  static const double v = [] {
    const Polynomial p = Polynomial::from_descending({9, -24, 24, -9, 1});
    const auto r = real_roots(p, 0.0, 0.5);
    if (r.empty()) throw Error(ErrorKind::SolverFailure, "no root of the W1 quartic in [0, 1/2]");
    return r.front();
  }();
  return v;
}

/// Same root by Ferrari's formula on the monic quartic x^4 + a x^3 + b x^2 + c x + d.
inline double x_max_w1_radical() {
  const double a = -24.0 / 9, b = 24.0 / 9, c = -9.0 / 9, d = 1.0 / 9;
  const double p = b - 3 * a * a / 8;
  const double q = c - a * b / 2 + a * a * a / 8;
  const double r = d - a * c / 4 + a * a * b / 16 - 3 * a * a * a * a / 256;
  // Resolvent cubic m^3 + p m^2 + (p^2/4 - r) m - q^2/8 = 0, take a positive root.
  const double A2 = p, A1 = p * p / 4 - r, A0 = -q * q / 8;
  const double Q = (3 * A1 - A2 * A2) / 9;
  const double R = (9 * A2 * A1 - 27 * A0 - 2 * A2 * A2 * A2) / 54;
  const double disc = Q * Q * Q + R * R;
  double m;
  if (disc >= 0) {
    m = std::cbrt(R + std::sqrt(disc)) + std::cbrt(R - std::sqrt(disc)) - A2 / 3;
  } else {
    const double th = std::acos(R / std::sqrt(-Q * Q * Q));
    m = 2 * std::sqrt(-Q) * std::cos(th / 3) - A2 / 3;
  }
  const double s = std::sqrt(2 * m);
  std::vector<double> roots;
  for (int sign : {1, -1}) {
    const double bb = sign * s;
    const double cc = p / 2 + m - sign * q / (2 * s);
    const double dd = bb * bb - 4 * cc;
    if (dd >= 0) {
      roots.push_back((-bb + std::sqrt(dd)) / 2 - a / 4);
      roots.push_back((-bb - std::sqrt(dd)) / 2 - a / 4);
    }
  }
  return *std::min_element(roots.begin(), roots.end());
}

/// The positive root of (3-y)x^4 - 3x^3 - yx^2 + (2+y)x - 1, lower end of the
/// W2 x-range.
inline double w2_x_min(double y) {
  const Polynomial p = Polynomial::from_descending({3 - y, -3, -y, 2 + y, -1});
  const auto r = real_roots(p, 0.0, 1.0);
  if (r.empty()) throw Error(ErrorKind::SolverFailure, "no root for the W2 lower bound");
  return r.front();
}

/// Bracket [lo, hi] for x in the W3 family at given y (empty when lo > hi).
inline std::pair<double, double> w3_x_range(double y) {
  const double a = 1 + 12 * y + 3 * y * y;
  const double rad1 = a * a - 192 * y * y;
  const double b1 = rad1 >= 0 ? a - std::sqrt(rad1) : std::numeric_limits<double>::quiet_NaN();
  const double b2 = 12 * y * (2 + y - std::sqrt(2 + 2 * y + y * y));
  const double lo = std::max(std::isnan(b1) ? b2 : b1, b2) / (24 * y);
  const double y2 = y * y, y3 = y2 * y, y4 = y3 * y;
  const Polynomial p = Polynomial::from_descending(
      {16 * y2, -12 * y * (1 + 2 * y + 5 * y2), 1 + 12 * y + 34 * y2 + 84 * y3 + 45 * y4,
       -(5 + 16 * y + 50 * y2 + 24 * y3 + y4) * y, 4 * y2 * (1 + y) * (1 + y)});
  const auto r = real_roots(p);
  const double hi = r.empty() ? -1.0 : r.front();
  return {lo, hi};
}

inline double w3_x_max(double y) { return w3_x_range(y).second; }

// ---------------------------------------------------------------------------
// Construction.

/// Model for the family without any domain check. Throws DivisionByZero where
/// a derived entry is undefined. Derived entries are not clamped.
inline TriangleModel build_model_unchecked(FamilyId f, FamilyParams p) {
  using namespace family_detail;
  const double x = p.x, y = p.y;
  TriangleModel m;
  switch (f.kind) {
    case FamilyKind::GHZ: m = ghz_model_raw(x, y); break;
    case FamilyKind::W1: {
      const auto e = w1_entries(x, y);
      if (!e) throw Error(ErrorKind::DivisionByZero, "W1 entries undefined");
      m.q = {1 - 2 * x, x, x};
      m.r = {y, 1 - y};
      m.s = {y, 1 - y};
      m.A = Table<double>{{e->z, 1}, {1, e->t}};
      m.B = Table<double>{{1, 0, 1}, {0, 0, 1}};
      m.C = Table<double>{{1, 0}, {1, 1}, {0, 0}};
      break;
    }
    case FamilyKind::W2: {
      const auto e = w2_entries(x, y);
      if (!e) throw Error(ErrorKind::DivisionByZero, "W2 entries undefined");
      m.q = {e->z, e->z, e->t, 1 - 2 * e->z - e->t};
      m.r = {x, 1 - x};
      m.s = {x, 1 - x};
      m.A = Table<double>{{0, 1}, {1, 1}};
      m.B = Table<double>{{y, 1, 1, 0}, {0, 1, 0, 1}};
      m.C = Table<double>{{1, 1}, {y, 0}, {1, 0}, {0, 1}};
      break;
    }
    case FamilyKind::W3: {
      const auto e = w3_entries(x, y);
      if (!e) throw Error(ErrorKind::DivisionByZero, "W3 entries undefined");
      m.q = {x, e->z, 1 - x - e->z};
      m.r = m.q;
      m.s = {y, (1 - y) / 2, (1 - y) / 2};
      m.A = Table<double>{{0, 1, 0}, {1, 1, 0}, {1, 1, 1}};
      m.B = Table<double>{{0, 1, 1}, {0, 0, 1}, {1, 1, 1}};
      m.C = Table<double>{{e->t, 1, 1}, {1, e->u, 0}, {1, 0, 0}};
      break;
    }
    case FamilyKind::W4: {
      const auto e = w4_entries(x, y);
      if (!e) throw Error(ErrorKind::DivisionByZero, "W4 entries undefined");
      m.q = {e->z, e->t, 1 - e->z - e->t};
      m.r = {e->u, e->v, 1 - e->u - e->v};
      m.s = {x, 1 - x};
      m.A = Table<double>{{0, 1}, {1, 1}, {0, 0}};
      m.B = Table<double>{{y, 1, 1}, {1, 1, 0}};
      m.C = Table<double>{{0, 0, 1}, {1, 0, 1}, {1, 1, 1}};
      break;
    }
    case FamilyKind::W5: {
      const auto sol = w5::f_w5(x, y);
      if (sol.status != w5::W5Status::Feasible)
        throw Error(ErrorKind::OutOfDomain, "no feasible boundary model at these (E1, E2)");
      m = w5::general_model(*sol.point);
      break;
    }
  }
  return f.flipped ? flip_outcomes(std::move(m)) : m;
}

namespace family_detail {

inline bool entries_valid(const TriangleModel& m) {
  for (const auto* v : {&m.q, &m.r, &m.s})
    for (double e : *v)
      if (!std::isfinite(e) || !in_unit(e)) return false;
  for (const auto* t : {&m.A, &m.B, &m.C})
    for (double e : t->data)
      if (!std::isfinite(e) || !in_unit(e)) return false;
  return true;
}

inline bool printed_domain(FamilyKind k, double x, double y) {
  switch (k) {
    case FamilyKind::GHZ: return x >= 0 && y >= 0 && x + y <= 1;
    case FamilyKind::W1: {
      if (!(x >= 0 && x <= x_max_w1())) return false;
      const double lo = 1 + x + std::sqrt((1 + 5 * x * x - 2 * x * x * x) / (1 - 2 * x));
      const double hi = 4 - 2 * x * (1 + std::sqrt((5 - 2 * x) / (1 - 2 * x)));
      return lo <= 4 * y && 4 * y <= hi;
    }
    case FamilyKind::W2: return y >= 0 && y <= 1 && x <= 1 && x >= w2_x_min(y);
    case FamilyKind::W3: {
      if (!(y >= 1.0 / 3.0 && y <= 1)) return false;
      const auto [lo, hi] = w3_x_range(y);
      return x >= lo && x <= hi;
    }
    case FamilyKind::W4: return x >= 0 && x <= 1 && y >= 0 && y <= 1;
    case FamilyKind::W5: return w5::e3_range(x, y).has_value();
  }
  return false;
}

}  // namespace family_detail

/// True iff (x, y) is in the family's printed domain and every derived entry
/// is a probability. For W5 the boundary solver must find a feasible model.
inline bool in_domain(FamilyId f, FamilyParams p) {
  using namespace family_detail;
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) return false;
  if (f.kind == FamilyKind::W5) {
    if (!w5::e3_range(p.x, p.y)) return false;
    return w5::f_w5(p.x, p.y).status == w5::W5Status::Feasible;
  }
  if (!printed_domain(f.kind, p.x, p.y)) return false;
  try {
    return entries_valid(build_model_unchecked(f, p));
  } catch (const Error&) {
    return false;
  }
}

/// Family model with derived entries clamped to [0, 1].
inline TriangleModel build_model(FamilyId f, FamilyParams p) {
  if (!in_domain(f, p)) throw Error(ErrorKind::OutOfDomain, "parameters outside the family domain");
  TriangleModel m = build_model_unchecked(f, p);
  for (auto* v : {&m.q, &m.r, &m.s})
    for (double& e : *v) e = family_detail::clamp01(e);
  for (auto* t : {&m.A, &m.B, &m.C})
    for (double& e : t->data) e = family_detail::clamp01(e);
  return m;
}

/// Correlators of the GHZ family in closed form.
inline Correlators ghz_family_correlators(double x, double y) {
  const double xy = x * y, y2 = y * y;
  return {-1 + 4 * xy + 2 * y2,
          1 - 8 * xy + 4 * x * xy - 4 * y2 + 12 * x * y2 + 4 * y2 * y,
          -1 + 12 * xy - 12 * x * xy + 6 * y2 - 12 * x * y2 - 4 * y2 * y};
}

inline Correlators boundary_point(FamilyId f, FamilyParams p) {
  if (f.kind == FamilyKind::W5) {
    if (!w5::e3_range(p.x, p.y)) throw Error(ErrorKind::OutOfDomain, "(E1, E2) outside tetrahedron");
    const auto sol = w5::f_w5(p.x, p.y);
    if (sol.status != w5::W5Status::Feasible)
      throw Error(ErrorKind::OutOfDomain, "no feasible boundary model at these (E1, E2)");
    const Correlators c{p.x, p.y, sol.e3};
    return f.flipped ? relabel(c) : c;
  }
  const TriangleModel m = build_model(f, p);
  const Correlators enumerated = behavior_to_correlators(evaluate(m, 1e-9), 1e-9);
  if (f.kind == FamilyKind::GHZ) {
    Correlators c = ghz_family_correlators(p.x, p.y);
    if (f.flipped) c = relabel(c);
    if (std::max({std::abs(c.e1 - enumerated.e1), std::abs(c.e2 - enumerated.e2),
                  std::abs(c.e3 - enumerated.e3)}) > 1e-12)
      throw Error(ErrorKind::SolverFailure, "closed-form correlators disagree with enumeration");
    return c;
  }
  return enumerated;
}

namespace family_detail {

struct Box { double x0, x1, y0, y1; };

inline Box sampling_box(FamilyKind k) {
  switch (k) {
    case FamilyKind::GHZ: return {0, 1, 0, 1};
    case FamilyKind::W1: return {0, x_max_w1(), 0, 1};
    case FamilyKind::W2: return {0, 1, 0, 1};
    case FamilyKind::W3: return {0, 1, 1.0 / 3.0, 1};
    case FamilyKind::W4: return {0, 1, 0, 1};
    case FamilyKind::W5: return {0, 1, -1.0 / 3.0, 1};
  }
  return {0, 1, 0, 1};
}

}  // namespace family_detail

struct BoundarySample {
  FamilyParams params;
  Correlators point;
};

/// Uniform rejection sampling in parameter space. Sample i draws from the
/// stream derive_stream(seed, i) until it lands in the domain and `keep`
/// accepts the point.
inline std::vector<BoundarySample> sample_boundary_with_params(
    FamilyId f, std::size_t n, std::uint64_t seed,
    const std::function<bool(const BoundarySample&)>& keep = {}) {
  if (n == 0) throw Error(ErrorKind::InvalidInput, "n must be >= 1");
  const auto box = family_detail::sampling_box(f.kind);
  std::vector<BoundarySample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(derive_stream(seed, i));
    bool found = false;
    for (int attempt = 0; attempt < 100000; ++attempt) {
      const FamilyParams p{rng.uniform(box.x0, box.x1), rng.uniform(box.y0, box.y1)};
      if (!in_domain(f, p)) continue;
      BoundarySample b{p, boundary_point(f, p)};
      if (keep && !keep(b)) continue;
      out.push_back(b);
      found = true;
      break;
    }
    if (!found)
      throw Error(ErrorKind::EmptyDomain, "rejection sampling failed 100000 consecutive times");
  }
  return out;
}

inline std::vector<Correlators> sample_boundary(FamilyId f, std::size_t n, std::uint64_t seed) {
  std::vector<Correlators> out;
  for (const auto& s : sample_boundary_with_params(f, n, seed)) out.push_back(s.point);
  return out;
}

}  // namespace trilocal
