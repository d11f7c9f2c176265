#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

namespace trilocal {

/// Real polynomial with coefficients in ascending order: c[0] + c[1] x + ...
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<double> ascending) : c_(std::move(ascending)) { trim(); }

  /// Builds from descending coefficients, the order polynomials are usually written in.
  static Polynomial from_descending(std::vector<double> desc) {
    std::reverse(desc.begin(), desc.end());
    return Polynomial(std::move(desc));
  }

  int degree() const { return static_cast<int>(c_.size()) - 1; }
  const std::vector<double>& coefficients() const { return c_; }

  double operator()(double x) const {
    double acc = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * x + *it;
    return acc;
  }

  Polynomial derivative() const {
    if (c_.size() <= 1) return Polynomial({0.0});
    std::vector<double> d(c_.size() - 1);
    for (std::size_t i = 1; i < c_.size(); ++i) d[i - 1] = static_cast<double>(i) * c_[i];
    return Polynomial(std::move(d));
  }

  /// Cauchy bound: every real root lies in [-bound, bound].
  double root_bound() const {
    if (c_.size() <= 1) return 0.0;
    const double lead = std::abs(c_.back());
    double m = 0.0;
    for (std::size_t i = 0; i + 1 < c_.size(); ++i) m = std::max(m, std::abs(c_[i]) / lead);
    return 1.0 + m;
  }

 private:
  void trim() {
    while (c_.size() > 1 && c_.back() == 0.0) c_.pop_back();
    if (c_.empty()) c_.push_back(0.0);
  }

  std::vector<double> c_;
};

/// Bisection on a sign-checked bracket; returns nullopt if f(lo), f(hi) share a sign.
inline std::optional<double> bisect(const std::function<double(double)>& f, double lo, double hi,
                                    double xtol = 1e-15, int max_iter = 200) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0)) return std::nullopt;
  for (int i = 0; i < max_iter && hi - lo > xtol * std::max(1.0, std::abs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// All real roots of p in [lo, hi], ascending. Roots of the derivative split
/// the interval into monotone pieces, each of which holds at most one root
/// and is solved by bisection. Double roots (touching zeros) are reported
/// when the polynomial value at a critical point is within `ztol`.
inline std::vector<double> real_roots(const Polynomial& p, double lo, double hi,
                                      double ztol = 1e-14) {
  std::vector<double> roots;
  if (p.degree() <= 0) return roots;
  if (p.degree() == 1) {
    const auto& c = p.coefficients();
    const double r = -c[0] / c[1];
    if (r >= lo && r <= hi) roots.push_back(r);
    return roots;
  }
  std::vector<double> knots{lo};
  for (double r : real_roots(p.derivative(), lo, hi, ztol))
    if (r > lo && r < hi) knots.push_back(r);
  knots.push_back(hi);

  auto f = [&](double x) { return p(x); };
  double scale = 0.0;
  for (double c : p.coefficients()) scale = std::max(scale, std::abs(c));
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double a = knots[i];
    const double b = knots[i + 1];
    const double fa = p(a);
    const double fb = p(b);
    if (fa == 0.0) {
      roots.push_back(a);
      continue;
    }
    if ((fa > 0) != (fb > 0) && fb != 0.0) {
      if (auto r = bisect(f, a, b)) roots.push_back(*r);
    } else if (i > 0 && std::abs(fa) <= ztol * scale) {
      roots.push_back(a);
    }
  }
  if (p(hi) == 0.0) roots.push_back(hi);
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [](double a, double b) { return std::abs(a - b) <= 1e-13; }),
              roots.end());
  return roots;
}

inline std::vector<double> real_roots(const Polynomial& p) {
  const double b = p.root_bound();
  return real_roots(p, -b, b);
}

}  // namespace trilocal
