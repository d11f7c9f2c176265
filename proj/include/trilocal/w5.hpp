#pragma once

// Boundary surface generated by the general ternary model
//
//   q = [x, y, 1-x-y], r = [z, t, 1-z-t], s = [u, v, 1-u-v],
//   A = [[0,1,0],[1,1,0],[1,1,1]], B = [[0,1,1],[0,0,1],[1,1,1]],
//   C = [[w,1,1],[1,k,0],[1,0,0]]
//
// restricted to k = 1. Fixing (E1, E2) and party symmetry leaves (x, z)
// free; E3 and k are then rational functions of (x, z) and the surface value
// f(E1, E2) is the smallest E3 over feasible stationary points of E3 on the
// curve k(x, z) = 1.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "trilocal/behavior.hpp"
#include "trilocal/dual.hpp"
#include "trilocal/error.hpp"
#include "trilocal/model.hpp"

namespace trilocal::w5 {

// ---------------------------------------------------------------------------
// Printed polynomial factors. T is double or Dual2.

template <class T>
T poly_P(const T& x, const T& z, double E1, double E2) {
  const double m = 1 - 2 * E1 + E2;
  const T a = T(1 + E1) - T(2) * z;
  return a * a * T(m) -
         T(2) * x *
             (T(2 * (1 + E1) * m) + z * (x + z) * T(3 - 11 * E1 - 2 * E1 * E1 + 3 * E2) -
              z * T(5 - 10 * E1 + 5 * E2 - 9 * E1 * E1 + 3 * E1 * E2) -
              T(2) * x * (T(m) - T(4 * E1) * z * z));
}

template <class T>
T poly_Q(const T& x, const T& z, double E1, double E2) {
  const T xz = x * z;
  return T(-4 * E1 + 4) * x * xz + T(4 * E1 + 4) * xz * z + T(-4 * E1 - 4) * xz +
         T(4 * E1 - 2 * E2 - 2) * x + T(-2 * E1 * E1 + E1 * E2 - E1 + E2 + 1);
}

template <class T>
T poly_R(const T& x, const T& z, double E1, double E2) {
  const T xz = x * z;
  return T(4 * E1 + 4) * x * xz + T(-4 * E1 + 4) * xz * z + T(-4 * E1 - 4) * xz +
         T(4 * E1 - 2 * E2 - 2) * z + T(-2 * E1 * E1 + E1 * E2 - E1 + E2 + 1);
}

template <class T>
T poly_S(const T& x, const T& z, double E1, double E2) {
  const double m = 1 - 2 * E1 + E2;
  const T xz = x * z;
  const T zz = z * z;
  const T inner = T((1 + E1) * m) - T(8 * E1) * x * zz + T(2 * E1 * E1 + 4 * E1 + 2 * E2) * xz +
                  T(2 * E1 * E1 + 4 * E1 + 2 * E2) * zz +
                  T(-2 * E1 * E1 - 2 * E1 * E2 + 2 * E1 - 4 * E2 - 2) * z;
  return (T(1 + E1) - T(2) * z) * T((1 + E1) * m) - T(2) * x * inner;
}

template <class T>
T poly_T(const T& x, const T& z, double E1, double E2) {
  const double m = 1 - 2 * E1 + E2;
  return T((1 + E1) * m) + T(4) * x * z * (T(2) - z - x + T(E1) * z - T(E1) * x) +
         T(4 * E1 - 2 * E2 - 2) * x + T(-4 * E1 + 4) * z * z + T(4 * E1 * E1 - 4) * z;
}

template <class T>
T poly_U(const T& x, const T& z, double E1, double E2) {
  const double m = 1 - 2 * E1 + E2;
  const T xx = x * x;
  const T xz = x * z;
  return (T(1 + E1) - T(2) * z) * T(m) + T(-4 + 4 * E1 * E1) * x + T(4 - 4 * E1) * xx +
         T(8) * xz + T(-4 + 4 * E1) * xx * z + T(-4 - 4 * E1) * xz * z;
}

template <class T>
T e3_rational(const T& x, const T& z, double E1, double E2) {
  return poly_P(x, z, E1, E2) / (T(2) * x * z * (T(1 + E1) - x - z));
}

template <class T>
T k_rational(const T& x, const T& z, double E1, double E2) {
  const double m = 1 - 2 * E1 + E2;
  return poly_Q(x, z, E1, E2) * poly_R(x, z, E1, E2) * poly_S(x, z, E1, E2) /
         (T(4 * m) * x * z * (T(1 + E1) - x - z) * poly_T(x, z, E1, E2) * poly_U(x, z, E1, E2));
}

inline constexpr double kSingularTol = 1e-14;

inline void require_regular_e3(double x, double z, double e1) {
  if (std::abs(2 * x * z * (1 + e1 - x - z)) <= kSingularTol)
    throw Error(ErrorKind::SingularDenominator, "2xz(1+E1-x-z) vanishes");
}

inline void require_regular_k(double x, double z, double e1, double e2) {
  require_regular_e3(x, z, e1);
  const double den = 4 * x * z * (1 + e1 - x - z) * (1 - 2 * e1 + e2) * poly_T(x, z, e1, e2) *
                     poly_U(x, z, e1, e2);
  if (std::abs(1 - 2 * e1 + e2) <= kSingularTol || std::abs(den) <= kSingularTol)
    throw Error(ErrorKind::SingularDenominator, "denominator of k(x, z) vanishes");
}

inline double e3_of(double x, double z, double e1, double e2) {
  require_regular_e3(x, z, e1);
  return e3_rational(x, z, e1, e2);
}

inline double k_of(double x, double z, double e1, double e2) {
  require_regular_k(x, z, e1, e2);
  return k_rational(x, z, e1, e2);
}

/// E3 and k with exact first and second partials in (x, z).
struct Jet {
  Dual2 e3;
  Dual2 k;
};

inline Jet jet(double x, double z, double e1, double e2) {
  const Dual2 dx = Dual2::variable(x, 0);
  const Dual2 dz = Dual2::variable(z, 1);
  return {e3_rational(dx, dz, e1, e2), k_rational(dx, dz, e1, e2)};
}

/// Lagrange condition dE3/dx dk/dz - dE3/dz dk/dx.
inline double stationarity_residual(double x, double z, double e1, double e2) {
  require_regular_k(x, z, e1, e2);
  const Jet j = jet(x, z, e1, e2);
  return j.e3.dx() * j.k.dz() - j.e3.dz() * j.k.dx();
}

// ---------------------------------------------------------------------------
// Parameter recovery from (x, z).

struct W5Point {
  double x = 0, y = 0, z = 0, t = 0, u = 0, v = 0, w = 0, k = 0;
  double e3 = 0;

  /// Smallest slack over all positivity constraints (negative = violated).
  double positivity_margin() const {
    return std::min({x, y, 1 - x - y, z, t, 1 - z - t, u, v, 1 - u - v, w, 1 - w, k, 1 - k});
  }
};

/// Model assembled from a parameter point.
inline TriangleModel general_model(const W5Point& p) {
  TriangleModel m;
  m.q = {p.x, p.y, 1 - p.x - p.y};
  m.r = {p.z, p.t, 1 - p.z - p.t};
  m.s = {p.u, p.v, 1 - p.u - p.v};
  m.A = Table<double>{{0, 1, 0}, {1, 1, 0}, {1, 1, 1}};
  m.B = Table<double>{{0, 1, 1}, {0, 0, 1}, {1, 1, 1}};
  m.C = Table<double>{{p.w, 1, 1}, {1, p.k, 0}, {1, 0, 0}};
  return m;
}

/// Solves the four symmetry equations and the two correlator equations for
/// (y, t, u, v, w, k) given (x, z). The system is multilinear and decouples:
/// <ab> - <a> - <b> = 4uxz - 1 fixes u, the compatibility condition of the
/// three equations involving C is linear in v, <b> then gives y, <a> gives t,
/// and the remaining pair is linear in (k t y, w x z). No positivity check.
inline W5Point symmetric_parameters(double x, double z, double e1, double e2) {
  require_regular_e3(x, z, e1);
  const double m = 1 - 2 * e1 + e2;
  if (std::abs(m) <= kSingularTol)
    throw Error(ErrorKind::SingularDenominator, "1 - 2E1 + E2 vanishes");
  auto guard = [](double d, const char* what) {
    if (std::abs(d) <= kSingularTol) throw Error(ErrorKind::SingularDenominator, what);
  };
  W5Point p;
  p.x = x;
  p.z = z;
  p.u = m / (4 * x * z);
  const double lin = 2 * e1 * e1 - e1 * e2 - 4 * e1 * x * x * z + 4 * e1 * x * z * z +
                     4 * e1 * x * z - 4 * e1 * z + e1 + 2 * e2 * z - e2 - 4 * x * x * z -
                     4 * x * z * z + 4 * x * z + 2 * z - 1;
  p.v = lin / (8 * x * z * (1 + e1 - x - z));
  guard(p.v, "v vanishes");
  p.y = (1 - e1 - 2 * p.u * x) / (2 * p.v) - x;
  const double rest = 1 - p.u - p.v;
  guard(rest, "1 - u - v vanishes");
  p.t = (1 - 2 * z + 2 * p.v * z - e1) / (2 * rest);

  const double s1 = (e1 + 4 * x * z - 2 * x - 2 * z + 1) / 2;
  const double known_bc = 4 * p.u * x * z - 2 * p.u * x + 4 * p.v * x * z - 2 * p.v * x -
                          4 * p.v * p.y * z + 2 * p.v * p.y - 4 * x * z + 2 * x + 2 * z - 1;
  const double s2 = e2 - known_bc;
  const double wxz = (s1 * (2 - 4 * p.v) - s2) / (4 * p.u);
  const double kty = s1 - wxz;
  guard(p.t * p.y, "t y vanishes");
  p.w = wxz / (x * z);
  p.k = kty / (p.t * p.y);
  p.e3 = e3_rational(x, z, e1, e2);
  return p;
}

/// Parameter point for (x, z), or nullopt when it is singular or violates
/// positivity beyond `tol`. On success the recovered k agrees with k_of and
/// the enumerated E3 with e3_of.
inline std::optional<W5Point> solve_symmetry(double x, double z, double e1, double e2,
                                             double tol = 1e-10) {
  W5Point p;
  try {
    p = symmetric_parameters(x, z, e1, e2);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::SingularDenominator) return std::nullopt;
    throw;
  }
  if (!(p.positivity_margin() >= -tol)) return std::nullopt;
  double kp;
  try {
    kp = k_of(x, z, e1, e2);
  } catch (const Error&) {
    return std::nullopt;
  }
  if (std::abs(kp - p.k) > 1e-8 * std::max(1.0, std::abs(kp)))
    throw Error(ErrorKind::SolverFailure, "recovered k disagrees with k(x, z)");
  const Behavior b = evaluate_unchecked(general_model(p));
  double e3 = 0;
  for (std::size_t i = 0; i < 8; ++i)
    e3 += Behavior::sign(i, 0) * Behavior::sign(i, 1) * Behavior::sign(i, 2) * b.p[i];
  if (std::abs(e3 - p.e3) > 1e-8)
    throw Error(ErrorKind::SolverFailure, "enumerated E3 disagrees with E3(x, z)");
  return p;
}

// ---------------------------------------------------------------------------
// Surface value f(E1, E2).

struct SolverOptions {
  int grid = 32;            // starts per axis
  double box_margin = 1e-6;
  int max_newton = 120;
  double dedup = 1e-7;
  double positivity_tol = 1e-10;
  double k_tol = 1e-9;
  // Stationary points where Newton stalls with |k - 1| below this are
  // accepted as tangencies: near a maximum of k equal to 1 the curve k = 1
  // shrinks to a point and rounding of (E1, E2) can lift it off the level.
  double tangent_tol = 1e-6;
};

enum class W5Status { Feasible, Infeasible, NotConverged };

inline const char* to_string(W5Status s) {
  switch (s) {
    case W5Status::Feasible: return "Feasible";
    case W5Status::Infeasible: return "Infeasible";
    case W5Status::NotConverged: return "NotConverged";
  }
  return "?";
}

struct StationaryPoint {
  double x = 0, z = 0, e3 = 0;
  double stationarity = 0;
  double k_residual = 0;
  bool feasible = false;
};

struct W5Solution {
  W5Status status = W5Status::Infeasible;
  double x = std::numeric_limits<double>::quiet_NaN();
  double z = std::numeric_limits<double>::quiet_NaN();
  double e3 = std::numeric_limits<double>::quiet_NaN();
  double stationarity_residual = std::numeric_limits<double>::quiet_NaN();
  double constraint_residual = std::numeric_limits<double>::quiet_NaN();  // |k - 1|
  std::optional<W5Point> point;
  std::vector<StationaryPoint> roots;  // all distinct roots found, feasible or not
};

/// Range of E3 over valid behaviors with the given (E1, E2); empty when
/// (E1, E2) lies outside the projection of the tetrahedron.
inline std::optional<std::pair<double, double>> e3_range(double e1, double e2, double tol = 1e-12) {
  const double lo = std::max(-1 - 3 * e1 - 3 * e2, -1 + e1 + e2);
  const double hi = std::min(1 - 3 * e1 + 3 * e2, 1 + e1 - e2);
  if (lo > hi + tol) return std::nullopt;
  return std::make_pair(lo, std::max(lo, hi));
}

namespace detail {

struct Eval {
  double f1, f2;  // stationarity, k - 1
  double j11, j12, j21, j22;
  double scale;   // magnitude reference for f1
};

inline std::optional<Eval> eval_system(double x, double z, double e1, double e2) {
  const Jet j = jet(x, z, e1, e2);
  const Dual2& E = j.e3;
  const Dual2& K = j.k;
  Eval r{};
  r.f1 = E.dx() * K.dz() - E.dz() * K.dx();
  r.f2 = K.v - 1.0;
  r.j11 = E.dxx() * K.dz() + E.dx() * K.dxz() - E.dxz() * K.dx() - E.dz() * K.dxx();
  r.j12 = E.dxz() * K.dz() + E.dx() * K.dzz() - E.dzz() * K.dx() - E.dz() * K.dxz();
  r.j21 = K.dx();
  r.j22 = K.dz();
  r.scale = std::abs(E.dx() * K.dz()) + std::abs(E.dz() * K.dx());
  for (double d : {r.f1, r.f2, r.j11, r.j12, r.j21, r.j22})
    if (!std::isfinite(d)) return std::nullopt;
  return r;
}

struct Box {
  double lo, hi, e1, margin;
  bool inside(double x, double z) const {
    return x >= lo && x <= hi && z >= lo && z <= hi && 1 + e1 - x - z > margin;
  }
};

enum class NewtonOutcome { Converged, Tangent, Stalled, Capped };

struct NewtonResult {
  NewtonOutcome outcome = NewtonOutcome::Stalled;
  double x = 0, z = 0;
};

inline double merit(const Eval& e) { return e.f1 * e.f1 + e.f2 * e.f2; }

inline bool small_residual(const Eval& e) {
  return std::abs(e.f2) <= 1e-12 && std::abs(e.f1) <= 1e-10 * std::max(1.0, e.scale);
}

// Newton with backtracking on |F|^2. Runs until no step reduces the residual
// (or the step is negligible), so degenerate roots where both gradients
// vanish are still approached, if only linearly. Capped means the iteration
// limit was reached while the residual was still decreasing.
inline NewtonResult newton(double x, double z, double e1, double e2, const Box& box,
                           const SolverOptions& opt) {
  NewtonResult res;
  auto cur = eval_system(x, z, e1, e2);
  if (!cur) return res;
  bool capped = true;
  for (int it = 0; it < opt.max_newton && merit(*cur) > 0.0; ++it) {
    const double det = cur->j11 * cur->j22 - cur->j12 * cur->j21;
    if (!std::isfinite(det) || det == 0.0) break;
    const double dx = (-cur->f1 * cur->j22 + cur->f2 * cur->j12) / det;
    const double dz = (-cur->f2 * cur->j11 + cur->f1 * cur->j21) / det;
    const double m0 = merit(*cur);
    double lambda = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, lambda *= 0.5) {
      const double nx = x + lambda * dx;
      const double nz = z + lambda * dz;
      if (!box.inside(nx, nz)) continue;
      auto next = eval_system(nx, nz, e1, e2);
      if (!next || !(merit(*next) < m0)) continue;
      x = nx;
      z = nz;
      cur = next;
      accepted = true;
      break;
    }
    if (!accepted || lambda * std::max(std::abs(dx), std::abs(dz)) <= 1e-15) {
      capped = false;
      break;
    }
  }
  if (merit(*cur) == 0.0) capped = false;
  res.x = x;
  res.z = z;
  if (small_residual(*cur)) {
    res.outcome = NewtonOutcome::Converged;
  } else if (std::abs(cur->f2) <= opt.tangent_tol &&
             std::abs(cur->f1) <= 1e-10 * std::max(1.0, cur->scale)) {
    res.outcome = NewtonOutcome::Tangent;
  } else if (capped) {
    res.outcome = NewtonOutcome::Capped;
  }
  return res;
}

}  // namespace detail

/// Minimum of E3 over feasible stationary points of E3 on k(x, z) = 1.
/// Starts are the centres of grid cells crossed by the curve k = 1; each is
/// refined by damped Newton on {stationarity = 0, k = 1}.
inline W5Solution f_w5(double e1, double e2, const SolverOptions& opt = {}) {
  if (!e3_range(e1, e2)) throw Error(ErrorKind::InvalidInput, "(E1, E2) outside the tetrahedron");
  W5Solution sol;
  if (std::abs(1 - 2 * e1 + e2) <= 1e-12) return sol;  // u = 0: k undefined

  const detail::Box box{opt.box_margin, 1 - opt.box_margin, e1, opt.box_margin};
  const int n = std::max(2, opt.grid);
  const double h = (box.hi - box.lo) / n;

  // k - 1 at grid nodes (NaN where singular or outside the box).
  std::vector<double> g(static_cast<std::size_t>((n + 1) * (n + 1)),
                        std::numeric_limits<double>::quiet_NaN());
  auto node = [&](int i, int j) -> double& { return g[static_cast<std::size_t>(i * (n + 1) + j)]; };
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      const double x = box.lo + i * h;
      const double z = box.lo + j * h;
      if (!box.inside(x, z)) continue;
      const double kv = k_rational(x, z, e1, e2);
      if (std::isfinite(kv)) node(i, j) = kv - 1.0;
    }
  }

  bool stalled_near_feasible = false;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      bool pos = false, neg = false, any_nan = false;
      for (auto [di, dj] : {std::pair{0, 0}, {1, 0}, {0, 1}, {1, 1}}) {
        const double gv = node(i + di, j + dj);
        if (std::isnan(gv)) any_nan = true;
        else if (gv >= 0) pos = true;
        else neg = true;
      }
      // Cells touching a pole of k are also tried: the curve may pass through.
      if (!((pos && neg) || (any_nan && (pos || neg)))) continue;
      const double x0 = box.lo + (i + 0.5) * h;
      const double z0 = box.lo + (j + 0.5) * h;
      if (!box.inside(x0, z0)) continue;
      const auto nr = detail::newton(x0, z0, e1, e2, box, opt);
      if (nr.outcome == detail::NewtonOutcome::Stalled) continue;
      if (nr.outcome == detail::NewtonOutcome::Capped) {
        try {
          const W5Point p = symmetric_parameters(nr.x, nr.z, e1, e2);
          if (p.positivity_margin() >= -1e-6 && std::abs(p.k - 1) < 1e-3)
            stalled_near_feasible = true;
        } catch (const Error&) {
        }
        continue;
      }
      const bool dup = std::any_of(sol.roots.begin(), sol.roots.end(), [&](const auto& r) {
        return std::abs(r.x - nr.x) <= opt.dedup && std::abs(r.z - nr.z) <= opt.dedup;
      });
      if (dup) continue;
      StationaryPoint sp;
      sp.x = nr.x;
      sp.z = nr.z;
      try {
        sp.e3 = e3_of(nr.x, nr.z, e1, e2);
        sp.stationarity = stationarity_residual(nr.x, nr.z, e1, e2);
        sp.k_residual = std::abs(k_of(nr.x, nr.z, e1, e2) - 1.0);
      } catch (const Error&) {
        continue;
      }
      const auto p = solve_symmetry(nr.x, nr.z, e1, e2, opt.positivity_tol);
      const double k_tol =
          nr.outcome == detail::NewtonOutcome::Tangent ? opt.tangent_tol : opt.k_tol;
      sp.feasible = p.has_value() && sp.k_residual <= k_tol;
      sol.roots.push_back(sp);
      if (sp.feasible && (sol.status != W5Status::Feasible || sp.e3 < sol.e3)) {
        sol.status = W5Status::Feasible;
        sol.x = sp.x;
        sol.z = sp.z;
        sol.e3 = sp.e3;
        sol.stationarity_residual = sp.stationarity;
        sol.constraint_residual = sp.k_residual;
        sol.point = p;
      }
    }
  }
  if (sol.status != W5Status::Feasible && stalled_near_feasible)
    sol.status = W5Status::NotConverged;
  return sol;
}

}  // namespace trilocal::w5
