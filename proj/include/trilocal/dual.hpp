#pragma once

// Second-order forward-mode differentiation in two variables. A Dual2 carries
// a value together with its gradient and Hessian with respect to (x, z), so
// any rational expression templated on the scalar type yields exact first and
// second partials by the ordinary sum/product/quotient rules.

#include <array>
#include <cmath>

namespace trilocal {

struct Dual2 {
  double v = 0.0;
  std::array<double, 2> d{0.0, 0.0};
  // Hessian entries: [0]=d2/dx2, [1]=d2/dxdz, [2]=d2/dz2
  std::array<double, 3> h{0.0, 0.0, 0.0};

  constexpr Dual2() = default;
  constexpr Dual2(double value) : v(value) {}  // NOLINT(google-explicit-constructor)

  static constexpr Dual2 variable(double value, int index) {
    Dual2 r(value);
    r.d[static_cast<std::size_t>(index)] = 1.0;
    return r;
  }

  double dx() const { return d[0]; }
  double dz() const { return d[1]; }
  double dxx() const { return h[0]; }
  double dxz() const { return h[1]; }
  double dzz() const { return h[2]; }

  Dual2& operator+=(const Dual2& o) {
    v += o.v;
    for (int i = 0; i < 2; ++i) d[i] += o.d[i];
    for (int i = 0; i < 3; ++i) h[i] += o.h[i];
    return *this;
  }
  Dual2& operator-=(const Dual2& o) {
    v -= o.v;
    for (int i = 0; i < 2; ++i) d[i] -= o.d[i];
    for (int i = 0; i < 3; ++i) h[i] -= o.h[i];
    return *this;
  }
  Dual2& operator*=(const Dual2& o) {
    Dual2 r;
    r.v = v * o.v;
    r.d[0] = d[0] * o.v + v * o.d[0];
    r.d[1] = d[1] * o.v + v * o.d[1];
    r.h[0] = h[0] * o.v + 2.0 * d[0] * o.d[0] + v * o.h[0];
    r.h[1] = h[1] * o.v + d[0] * o.d[1] + d[1] * o.d[0] + v * o.h[1];
    r.h[2] = h[2] * o.v + 2.0 * d[1] * o.d[1] + v * o.h[2];
    *this = r;
    return *this;
  }
  Dual2& operator/=(const Dual2& o) {
    // f/g = f * (1/g); 1/g has d = -g'/g^2, h = 2 g'g'^T/g^3 - g''/g^2
    const double inv = 1.0 / o.v;
    const double inv2 = inv * inv;
    const double inv3 = inv2 * inv;
    Dual2 rec;
    rec.v = inv;
    rec.d[0] = -o.d[0] * inv2;
    rec.d[1] = -o.d[1] * inv2;
    rec.h[0] = 2.0 * o.d[0] * o.d[0] * inv3 - o.h[0] * inv2;
    rec.h[1] = 2.0 * o.d[0] * o.d[1] * inv3 - o.h[1] * inv2;
    rec.h[2] = 2.0 * o.d[1] * o.d[1] * inv3 - o.h[2] * inv2;
    return *this *= rec;
  }

  friend Dual2 operator+(Dual2 a, const Dual2& b) { return a += b; }
  friend Dual2 operator-(Dual2 a, const Dual2& b) { return a -= b; }
  friend Dual2 operator*(Dual2 a, const Dual2& b) { return a *= b; }
  friend Dual2 operator/(Dual2 a, const Dual2& b) { return a /= b; }
  friend Dual2 operator-(Dual2 a) {
    a.v = -a.v;
    for (auto& x : a.d) x = -x;
    for (auto& x : a.h) x = -x;
    return a;
  }
};

inline double value_of(double x) { return x; }
inline double value_of(const Dual2& x) { return x.v; }

}  // namespace trilocal
