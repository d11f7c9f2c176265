#pragma once

// Triangle-local models: three independent sources with distributions q, r,
// s and per-party response tables. A(b,g) is P(a=+1 | beta=b, gamma=g),
// B(g,a) is P(b=+1 | gamma, alpha) and C(a,b) is P(c=+1 | alpha, beta); the
// first latent variable indexes rows.

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "trilocal/behavior.hpp"
#include "trilocal/error.hpp"

namespace trilocal {

/// Soft cap on source cardinalities; six values per source suffice for any
/// triangle-local behavior with binary outcomes.
inline constexpr std::size_t kMaxCardinality = 6;

/// Dense row-major matrix.
template <class T>
struct Table {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Table() = default;
  Table(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}
  Table(std::initializer_list<std::initializer_list<T>> init) {
    rows = init.size();
    cols = rows ? init.begin()->size() : 0;
    data.reserve(rows * cols);
    for (const auto& row : init) {
      if (row.size() != cols) throw Error(ErrorKind::InvalidModel, "ragged table");
      data.insert(data.end(), row.begin(), row.end());
    }
  }

  T& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  friend bool operator==(const Table&, const Table&) = default;
};

template <class T>
struct BasicTriangleModel {
  std::vector<T> q;  // alpha
  std::vector<T> r;  // beta
  std::vector<T> s;  // gamma
  Table<T> A;        // beta x gamma
  Table<T> B;        // gamma x alpha
  Table<T> C;        // alpha x beta

  std::array<std::size_t, 3> cardinalities() const { return {q.size(), r.size(), s.size()}; }

  friend bool operator==(const BasicTriangleModel&, const BasicTriangleModel&) = default;
};

using TriangleModel = BasicTriangleModel<double>;

/// Model with every response flipped (A -> 1 - A etc.).
template <class T>
BasicTriangleModel<T> flip_outcomes(BasicTriangleModel<T> m) {
  for (auto* t : {&m.A, &m.B, &m.C})
    for (auto& x : t->data) x = T(1) - x;
  return m;
}

/// Checks shapes, simplex constraints on q, r, s and [0, 1] bounds on the
/// tables. Throws InvalidModel describing the first violation.
template <class T>
void check_model(const BasicTriangleModel<T>& m, double tol = 1e-12,
                 bool allow_large_cardinality = false) {
  const auto [ca, cb, cg] = m.cardinalities();
  if (ca == 0 || cb == 0 || cg == 0) throw Error(ErrorKind::InvalidModel, "empty source");
  if (!allow_large_cardinality &&
      (ca > kMaxCardinality || cb > kMaxCardinality || cg > kMaxCardinality))
    throw Error(ErrorKind::InvalidModel, "cardinality above 6 (pass override to allow)");
  auto shape = [](const Table<T>& t, std::size_t r, std::size_t c, const char* name) {
    if (t.rows != r || t.cols != c || t.data.size() != r * c)
      throw Error(ErrorKind::InvalidModel, std::string("table ") + name + " has wrong shape");
  };
  shape(m.A, cb, cg, "A");
  shape(m.B, cg, ca, "B");
  shape(m.C, ca, cb, "C");
  auto simplex = [tol](const std::vector<T>& v, const char* name) {
    T sum{};
    for (const T& x : v) {
      if (as_double(x) < -tol)
        throw Error(ErrorKind::InvalidModel, std::string(name) + " has a negative entry");
      sum += x;
    }
    if (std::abs(as_double(sum) - 1.0) > tol)
      throw Error(ErrorKind::InvalidModel, std::string(name) + " does not sum to 1");
  };
  simplex(m.q, "q");
  simplex(m.r, "r");
  simplex(m.s, "s");
  for (const auto* t : {&m.A, &m.B, &m.C})
    for (const T& x : t->data) {
      const double d = as_double(x);
      if (!(d >= -tol && d <= 1.0 + tol))
        throw Error(ErrorKind::InvalidModel, "response probability outside [0, 1]");
    }
}

/// Behavior of the model by exhaustive enumeration of latent assignments.
template <class T>
BasicBehavior<T> evaluate_unchecked(const BasicTriangleModel<T>& m) {
  const auto [ca, cb, cg] = m.cardinalities();
  BasicBehavior<T> out;
  for (std::size_t al = 0; al < ca; ++al) {
    for (std::size_t be = 0; be < cb; ++be) {
      const T qr = m.q[al] * m.r[be];
      const T c1 = m.C(al, be);
      const T c0 = T(1) - c1;
      for (std::size_t ga = 0; ga < cg; ++ga) {
        const T w = qr * m.s[ga];
        const T a1 = m.A(be, ga);
        const T a0 = T(1) - a1;
        const T b1 = m.B(ga, al);
        const T b0 = T(1) - b1;
        out.p[0] += w * a0 * b0 * c0;
        out.p[1] += w * a0 * b0 * c1;
        out.p[2] += w * a0 * b1 * c0;
        out.p[3] += w * a0 * b1 * c1;
        out.p[4] += w * a1 * b0 * c0;
        out.p[5] += w * a1 * b0 * c1;
        out.p[6] += w * a1 * b1 * c0;
        out.p[7] += w * a1 * b1 * c1;
      }
    }
  }
  return out;
}

template <class T>
BasicBehavior<T> evaluate(const BasicTriangleModel<T>& m, double tol = 1e-12,
                          bool allow_large_cardinality = false) {
  check_model(m, tol, allow_large_cardinality);
  return evaluate_unchecked(m);
}

struct FitError {
  double sse = 0.0;
  double rms = 0.0;
};

inline FitError fit_error(const Behavior& model_behavior, const Behavior& target) {
  FitError e;
  for (std::size_t i = 0; i < 8; ++i) {
    const double d = model_behavior.p[i] - target.p[i];
    e.sse += d * d;
  }
  e.rms = std::sqrt(e.sse / 8.0);
  return e;
}

inline FitError fit_error(const TriangleModel& m, const Behavior& target) {
  return fit_error(evaluate(m, 1e-9, true), target);
}

/// True iff the model's behavior is invariant under party permutations.
inline bool symmetrize_check(const TriangleModel& m, double tol = 1e-9) {
  return asymmetry(evaluate(m, 1e-9, true)) <= tol;
}

/// Model with uniform sources of the given cardinalities and every response
/// equal to `response`.
inline TriangleModel constant_model(std::size_t ca, std::size_t cb, std::size_t cg,
                                    double response) {
  TriangleModel m;
  m.q.assign(ca, 1.0 / static_cast<double>(ca));
  m.r.assign(cb, 1.0 / static_cast<double>(cb));
  m.s.assign(cg, 1.0 / static_cast<double>(cg));
  m.A = Table<double>(cb, cg, response);
  m.B = Table<double>(cg, ca, response);
  m.C = Table<double>(ca, cb, response);
  return m;
}

/// Model producing the symmetric behavior (1/3, -5/27, -5/9): uniform ternary
/// sources with deterministic responses.
template <class T = double>
BasicTriangleModel<T> uniform_thirds_model() {
  const T third = T(1) / T(3);
  BasicTriangleModel<T> m;
  m.q = {third, third, third};
  m.r = m.q;
  m.s = m.q;
  // P(-1) is 1 on the listed latent pairs (1-based): A on (1,1),(1,3),(2,3);
  // B on (1,1),(2,1),(2,2); C on (2,3),(3,2),(3,3).
  m.A = Table<T>{{T(0), T(1), T(0)}, {T(1), T(1), T(0)}, {T(1), T(1), T(1)}};
  m.B = Table<T>{{T(0), T(1), T(1)}, {T(0), T(0), T(1)}, {T(1), T(1), T(1)}};
  m.C = Table<T>{{T(1), T(1), T(1)}, {T(1), T(1), T(0)}, {T(1), T(0), T(0)}};
  return m;
}

}  // namespace trilocal
