#pragma once

// Symmetric binary-outcome tripartite behaviors and their correlator
// coordinates (E1, E2, E3).

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "trilocal/error.hpp"

namespace trilocal {

/// Converts a scalar to double. Exact rational types are supported through
/// their numerator()/denominator() accessors.
template <class T>
double as_double(const T& x) {
  if constexpr (std::is_arithmetic_v<T>) {
    return static_cast<double>(x);
  } else {
    return static_cast<double>(x.numerator()) / static_cast<double>(x.denominator());
  }
}

template <class T>
struct BasicCorrelators {
  T e1{};
  T e2{};
  T e3{};

  friend bool operator==(const BasicCorrelators&, const BasicCorrelators&) = default;
};

using Correlators = BasicCorrelators<double>;

/// Outcome probabilities p(a,b,c) indexed lexicographically over
/// (-1,-1,-1), (-1,-1,1), ..., (1,1,1).
template <class T>
struct BasicBehavior {
  std::array<T, 8> p{};

  static constexpr std::size_t index(int a, int b, int c) {
    return static_cast<std::size_t>((a > 0 ? 4 : 0) + (b > 0 ? 2 : 0) + (c > 0 ? 1 : 0));
  }
  /// Outcome (+1 or -1) of `party` (0 = a, 1 = b, 2 = c) in entry `idx`.
  static constexpr int sign(std::size_t idx, int party) {
    return ((idx >> (2 - party)) & 1U) ? 1 : -1;
  }

  T& operator()(int a, int b, int c) { return p[index(a, b, c)]; }
  const T& operator()(int a, int b, int c) const { return p[index(a, b, c)]; }

  T total() const {
    T s{};
    for (const T& x : p) s += x;
    return s;
  }

  friend bool operator==(const BasicBehavior&, const BasicBehavior&) = default;
};

using Behavior = BasicBehavior<double>;

namespace archetype {
inline constexpr Correlators U{0.0, 0.0, 0.0};
inline constexpr Correlators GHZ{0.0, 1.0, 0.0};
inline constexpr Correlators W{1.0 / 3.0, -1.0 / 3.0, -1.0};
inline constexpr Correlators Wbar{-1.0 / 3.0, -1.0 / 3.0, 1.0};
inline constexpr Correlators Dplus{1.0, 1.0, 1.0};
inline constexpr Correlators Dminus{-1.0, 1.0, -1.0};
}  // namespace archetype

template <class T>
BasicBehavior<T> correlators_to_behavior(const BasicCorrelators<T>& c) {
  BasicBehavior<T> b;
  for (std::size_t i = 0; i < 8; ++i) {
    const int a = BasicBehavior<T>::sign(i, 0);
    const int bb = BasicBehavior<T>::sign(i, 1);
    const int cc = BasicBehavior<T>::sign(i, 2);
    b.p[i] = (T(1) + c.e1 * T(a + bb + cc) + c.e2 * T(a * bb + bb * cc + cc * a) +
              c.e3 * T(a * bb * cc)) /
             T(8);
  }
  return b;
}

/// Largest deviation of p from its image under any permutation of parties.
template <class T>
double asymmetry(const BasicBehavior<T>& b) {
  static constexpr std::array<std::array<int, 3>, 6> perms{
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  double worst = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    const std::array<int, 3> o{BasicBehavior<T>::sign(i, 0), BasicBehavior<T>::sign(i, 1),
                               BasicBehavior<T>::sign(i, 2)};
    for (const auto& pm : perms) {
      const double d = as_double(b.p[i] - b(o[pm[0]], o[pm[1]], o[pm[2]]));
      worst = std::max(worst, std::abs(d));
    }
  }
  return worst;
}

/// Symmetrized correlators of a normalized, party-symmetric behavior.
template <class T>
BasicCorrelators<T> behavior_to_correlators(const BasicBehavior<T>& b, double tol = 1e-9) {
  if (std::abs(as_double(b.total() - T(1))) > tol)
    throw Error(ErrorKind::InvalidInput, "behavior is not normalized");
  if (asymmetry(b) > tol) throw Error(ErrorKind::NotSymmetric, "behavior is not party-symmetric");
  BasicCorrelators<T> c;
  for (std::size_t i = 0; i < 8; ++i) {
    const int a = BasicBehavior<T>::sign(i, 0);
    const int bb = BasicBehavior<T>::sign(i, 1);
    const int cc = BasicBehavior<T>::sign(i, 2);
    c.e1 += T(a) * b.p[i];
    c.e2 += T(a * bb) * b.p[i];
    c.e3 += T(a * bb * cc) * b.p[i];
  }
  return c;
}

/// Correlators of the party-symmetrization of a normalized behavior: E1, E2
/// and E3 averaged over parties and pairs.
inline Correlators symmetrized_correlators(const Behavior& b) {
  Correlators c;
  for (std::size_t i = 0; i < 8; ++i) {
    const int a = Behavior::sign(i, 0);
    const int bb = Behavior::sign(i, 1);
    const int cc = Behavior::sign(i, 2);
    c.e1 += (a + bb + cc) * b.p[i] / 3.0;
    c.e2 += (a * bb + bb * cc + cc * a) * b.p[i] / 3.0;
    c.e3 += a * bb * cc * b.p[i];
  }
  return c;
}

/// Smallest of the eight outcome probabilities.
inline double min_probability(const Correlators& c) {
  const Behavior b = correlators_to_behavior(c);
  double m = b.p[0];
  for (double x : b.p) m = std::min(m, x);
  return m;
}

/// Tetrahedron membership.
inline bool is_valid(const Correlators& c, double tol = 1e-12) {
  return min_probability(c) >= -tol;
}

/// Global outcome flip (E1, E2, E3) -> (-E1, E2, -E3).
template <class T>
constexpr BasicCorrelators<T> relabel(const BasicCorrelators<T>& c) {
  return {-c.e1, c.e2, -c.e3};
}

inline double distance(const Correlators& a, const Correlators& b) {
  return std::sqrt((a.e1 - b.e1) * (a.e1 - b.e1) + (a.e2 - b.e2) * (a.e2 - b.e2) +
                   (a.e3 - b.e3) * (a.e3 - b.e3));
}

inline Correlators lerp(const Correlators& a, const Correlators& b, double t) {
  return {a.e1 + t * (b.e1 - a.e1), a.e2 + t * (b.e2 - a.e2), a.e3 + t * (b.e3 - a.e3)};
}

// ---------------------------------------------------------------------------
// Planar sections of the tetrahedron.

/// Mixtures of three anchor behaviors (barycentric grid over their triangle).
struct AnchorPlane {
  std::array<Correlators, 3> anchors;
};

/// Points with a1*E1 + a2*E2 + a3*E3 = c, gridded over the two coordinates not
/// eliminated, inside the box [lo, hi]^2.
struct CoefficientPlane {
  std::array<double, 3> a{0.0, 0.0, 0.0};
  double c = 0.0;
  double lo = -1.0;
  double hi = 1.0;
};

using PlaneSpec = std::variant<AnchorPlane, CoefficientPlane>;

inline void check_plane(const PlaneSpec& spec) {
  if (const auto* ap = std::get_if<AnchorPlane>(&spec)) {
    const auto& [p0, p1, p2] = ap->anchors;
    const std::array<double, 3> u{p1.e1 - p0.e1, p1.e2 - p0.e2, p1.e3 - p0.e3};
    const std::array<double, 3> v{p2.e1 - p0.e1, p2.e2 - p0.e2, p2.e3 - p0.e3};
    const double cx = u[1] * v[2] - u[2] * v[1];
    const double cy = u[2] * v[0] - u[0] * v[2];
    const double cz = u[0] * v[1] - u[1] * v[0];
    if (std::sqrt(cx * cx + cy * cy + cz * cz) < 1e-12)
      throw Error(ErrorKind::DegeneratePlane, "anchor points are collinear");
  } else {
    const auto& cp = std::get<CoefficientPlane>(spec);
    if (cp.a[0] == 0.0 && cp.a[1] == 0.0 && cp.a[2] == 0.0)
      throw Error(ErrorKind::DegeneratePlane, "all plane coefficients are zero");
    if (!(cp.hi > cp.lo)) throw Error(ErrorKind::DegeneratePlane, "empty bounding box");
  }
}

/// Uniform grid on the plane, keeping only valid behaviors. `resolution` is
/// the number of intervals per edge (anchor form) or per axis (coefficient form).
inline std::vector<Correlators> plane_grid(const PlaneSpec& spec, int resolution,
                                           double tol = 1e-12) {
  if (resolution < 1) throw Error(ErrorKind::InvalidInput, "resolution must be >= 1");
  check_plane(spec);
  std::vector<Correlators> out;
  const double n = resolution;
  if (const auto* ap = std::get_if<AnchorPlane>(&spec)) {
    const auto& [p0, p1, p2] = ap->anchors;
    for (int i = 0; i <= resolution; ++i) {
      for (int j = 0; j + i <= resolution; ++j) {
        const double s = i / n;
        const double t = j / n;
        const double r = 1.0 - s - t;
        const Correlators pt{r * p0.e1 + s * p1.e1 + t * p2.e1, r * p0.e2 + s * p1.e2 + t * p2.e2,
                             r * p0.e3 + s * p1.e3 + t * p2.e3};
        if (is_valid(pt, tol)) out.push_back(pt);
      }
    }
    return out;
  }
  const auto& cp = std::get<CoefficientPlane>(spec);
  // Eliminate the coordinate with the largest coefficient.
  std::size_t k = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (std::abs(cp.a[i]) > std::abs(cp.a[k])) k = i;
  const std::size_t f0 = (k + 1) % 3 < (k + 2) % 3 ? (k + 1) % 3 : (k + 2) % 3;
  const std::size_t f1 = 3 - k - f0;
  for (int i = 0; i <= resolution; ++i) {
    for (int j = 0; j <= resolution; ++j) {
      std::array<double, 3> e{};
      e[f0] = cp.lo + (cp.hi - cp.lo) * i / n;
      e[f1] = cp.lo + (cp.hi - cp.lo) * j / n;
      e[k] = (cp.c - cp.a[f0] * e[f0] - cp.a[f1] * e[f1]) / cp.a[k];
      const Correlators pt{e[0], e[1], e[2]};
      if (is_valid(pt, tol)) out.push_back(pt);
    }
  }
  return out;
}

}  // namespace trilocal
