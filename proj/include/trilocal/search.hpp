#pragma once

// Multi-start least-squares fitting of triangle-local models, plane scans and
// the boundary validation procedure.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "trilocal/behavior.hpp"
#include "trilocal/error.hpp"
#include "trilocal/families.hpp"
#include "trilocal/inequalities.hpp"
#include "trilocal/model.hpp"
#include "trilocal/parallel.hpp"
#include "trilocal/rng.hpp"

namespace trilocal {

enum class LocalMethod { LevenbergMarquardt, SpectralGradient };

inline const char* to_string(LocalMethod m) {
  return m == LocalMethod::LevenbergMarquardt ? "lm" : "spg";
}

struct SearchConfig {
  std::array<std::size_t, 3> cards{3, 3, 3};
  int restarts = 200;
  int max_iter = 2000;
  double sse_tol = 1e-16;
  double pg_tol = 1e-12;        // sup-norm of the projected gradient step
  int stall_window = 200;       // iterations
  double stall_rel = 1e-4;      // minimum relative sse decrease per window
  std::uint64_t seed = 0;
  double local_threshold = 1e-4;
  double early_stop_rms = 0.0;  // stop after a batch once best rms <= this (0 = off)
  unsigned threads = 1;
  bool allow_large_cardinality = false;
  LocalMethod method = LocalMethod::LevenbergMarquardt;
  bool revive = true;  // reassign responses of zero-weight latent values at stalls
};

inline void check_config(const SearchConfig& cfg) {
  if (cfg.restarts < 1) throw Error(ErrorKind::InvalidInput, "restarts must be >= 1");
  if (cfg.max_iter < 1) throw Error(ErrorKind::InvalidInput, "max_iter must be >= 1");
  for (std::size_t c : cfg.cards) {
    if (c < 1) throw Error(ErrorKind::InvalidInput, "cardinalities must be >= 1");
    if (c > kMaxCardinality && !cfg.allow_large_cardinality)
      throw Error(ErrorKind::InvalidInput, "cardinality above 6 (pass override to allow)");
  }
}

// ---------------------------------------------------------------------------
// Flat parametrization: q, r, s, A, B, C concatenated.

class ModelLayout {
 public:
  explicit ModelLayout(std::array<std::size_t, 3> cards) : c_(cards) {
    const auto [ca, cb, cg] = cards;
    off_[0] = 0;
    off_[1] = ca;
    off_[2] = ca + cb;
    off_[3] = ca + cb + cg;
    off_[4] = off_[3] + cb * cg;
    off_[5] = off_[4] + cg * ca;
    off_[6] = off_[5] + ca * cb;
  }

  std::size_t size() const { return off_[6]; }
  const std::array<std::size_t, 3>& cards() const { return c_; }
  std::size_t offset(int block) const { return off_[static_cast<std::size_t>(block)]; }
  std::size_t block_size(int block) const { return off_[block + 1] - off_[block]; }

  TriangleModel unpack(const std::vector<double>& th) const {
    const auto [ca, cb, cg] = c_;
    TriangleModel m;
    m.q.assign(th.begin() + off_[0], th.begin() + off_[1]);
    m.r.assign(th.begin() + off_[1], th.begin() + off_[2]);
    m.s.assign(th.begin() + off_[2], th.begin() + off_[3]);
    m.A = Table<double>(cb, cg);
    m.B = Table<double>(cg, ca);
    m.C = Table<double>(ca, cb);
    std::copy(th.begin() + off_[3], th.begin() + off_[4], m.A.data.begin());
    std::copy(th.begin() + off_[4], th.begin() + off_[5], m.B.data.begin());
    std::copy(th.begin() + off_[5], th.begin() + off_[6], m.C.data.begin());
    return m;
  }

  std::vector<double> pack(const TriangleModel& m) const {
    if (m.cardinalities() != c_) throw Error(ErrorKind::InvalidModel, "cardinalities differ");
    std::vector<double> th;
    th.reserve(size());
    for (const auto* v : {&m.q, &m.r, &m.s}) th.insert(th.end(), v->begin(), v->end());
    for (const auto* t : {&m.A, &m.B, &m.C}) th.insert(th.end(), t->data.begin(), t->data.end());
    return th;
  }

 private:
  std::array<std::size_t, 3> c_;
  std::array<std::size_t, 7> off_{};
};

/// Sum of squared probability errors and, if `grad` is non-null, its gradient.
inline double sse_and_gradient(const ModelLayout& L, const std::vector<double>& th,
                               const Behavior& target, std::vector<double>* grad) {
  const auto [ca, cb, cg] = L.cards();
  const double* q = th.data() + L.offset(0);
  const double* r = th.data() + L.offset(1);
  const double* s = th.data() + L.offset(2);
  const double* A = th.data() + L.offset(3);
  const double* B = th.data() + L.offset(4);
  const double* C = th.data() + L.offset(5);

  std::array<double, 8> p{};
  for (std::size_t al = 0; al < ca; ++al)
    for (std::size_t be = 0; be < cb; ++be) {
      const double qr = q[al] * r[be];
      const double c1 = C[al * cb + be], c0 = 1 - c1;
      for (std::size_t ga = 0; ga < cg; ++ga) {
        const double w = qr * s[ga];
        const double a1 = A[be * cg + ga], a0 = 1 - a1;
        const double b1 = B[ga * ca + al], b0 = 1 - b1;
        const double wa0 = w * a0, wa1 = w * a1;
        p[0] += wa0 * b0 * c0;
        p[1] += wa0 * b0 * c1;
        p[2] += wa0 * b1 * c0;
        p[3] += wa0 * b1 * c1;
        p[4] += wa1 * b0 * c0;
        p[5] += wa1 * b0 * c1;
        p[6] += wa1 * b1 * c0;
        p[7] += wa1 * b1 * c1;
      }
    }
  std::array<double, 8> res{};
  double sse = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    res[i] = p[i] - target.p[i];
    sse += res[i] * res[i];
  }
  if (!grad) return sse;

  grad->assign(L.size(), 0.0);
  double* gq = grad->data() + L.offset(0);
  double* gr = grad->data() + L.offset(1);
  double* gs = grad->data() + L.offset(2);
  double* gA = grad->data() + L.offset(3);
  double* gB = grad->data() + L.offset(4);
  double* gC = grad->data() + L.offset(5);
  for (std::size_t al = 0; al < ca; ++al)
    for (std::size_t be = 0; be < cb; ++be) {
      const double qr = q[al] * r[be];
      const double c1 = C[al * cb + be], c0 = 1 - c1;
      for (std::size_t ga = 0; ga < cg; ++ga) {
        const double rs = r[be] * s[ga];
        const double w = qr * s[ga];
        const double a1 = A[be * cg + ga], a0 = 1 - a1;
        const double b1 = B[ga * ca + al], b0 = 1 - b1;
        // Contract the residual tensor with the response of two parties.
        // R_bc(a) = sum_{b,c} res(a,b,c) PB(b) PC(c), etc.
        const double bc00 = b0 * c0, bc01 = b0 * c1, bc10 = b1 * c0, bc11 = b1 * c1;
        const double ra0 = res[0] * bc00 + res[1] * bc01 + res[2] * bc10 + res[3] * bc11;
        const double ra1 = res[4] * bc00 + res[5] * bc01 + res[6] * bc10 + res[7] * bc11;
        const double ac00 = a0 * c0, ac01 = a0 * c1, ac10 = a1 * c0, ac11 = a1 * c1;
        const double rb0 = res[0] * ac00 + res[1] * ac01 + res[4] * ac10 + res[5] * ac11;
        const double rb1 = res[2] * ac00 + res[3] * ac01 + res[6] * ac10 + res[7] * ac11;
        const double ab00 = a0 * b0, ab01 = a0 * b1, ab10 = a1 * b0, ab11 = a1 * b1;
        const double rc0 = res[0] * ab00 + res[2] * ab01 + res[4] * ab10 + res[6] * ab11;
        const double rc1 = res[1] * ab00 + res[3] * ab01 + res[5] * ab10 + res[7] * ab11;
        const double G = a0 * ra0 + a1 * ra1;
        gq[al] += 2 * rs * G;
        gr[be] += 2 * q[al] * s[ga] * G;
        gs[ga] += 2 * qr * G;
        gA[be * cg + ga] += 2 * w * (ra1 - ra0);
        gB[ga * ca + al] += 2 * w * (rb1 - rb0);
        gC[al * cb + be] += 2 * w * (rc1 - rc0);
      }
    }
  return sse;
}

// ---------------------------------------------------------------------------
// Feasible set: a product of simplices and boxes, with optional frozen
// coordinates.

/// Euclidean projection of v onto {x >= 0, sum x = mass} (sort-based).
inline void project_simplex(double* v, std::size_t n, double mass = 1.0) {
  if (n == 0) return;
  if (mass <= 0) {
    std::fill(v, v + n, 0.0);
    return;
  }
  std::vector<double> u(v, v + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0, tau = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cum += u[i];
    const double t = (cum - mass) / static_cast<double>(i + 1);
    if (u[i] - t > 0) tau = t;
  }
  for (std::size_t i = 0; i < n; ++i) v[i] = std::max(v[i] - tau, 0.0);
}

class FeasibleSet {
 public:
  explicit FeasibleSet(const ModelLayout& L) : L_(L), frozen_(L.size(), false) {}

  void freeze(std::size_t i) { frozen_[i] = true; }
  bool frozen(std::size_t i) const { return frozen_[i]; }
  std::size_t free_count() const {
    return static_cast<std::size_t>(std::count(frozen_.begin(), frozen_.end(), false));
  }

  /// Projects in place. Frozen coordinates are left unchanged; free simplex
  /// coordinates are projected onto the mass left by the frozen ones.
  void project(std::vector<double>& th) const {
    for (int b = 0; b < 3; ++b) {
      const std::size_t o = L_.offset(b), n = L_.block_size(b);
      double fixed_mass = 0;
      std::vector<double> free_vals;
      std::vector<std::size_t> idx;
      for (std::size_t i = o; i < o + n; ++i) {
        if (frozen_[i]) {
          fixed_mass += th[i];
        } else {
          free_vals.push_back(th[i]);
          idx.push_back(i);
        }
      }
      project_simplex(free_vals.data(), free_vals.size(), 1.0 - fixed_mass);
      for (std::size_t k = 0; k < idx.size(); ++k) th[idx[k]] = free_vals[k];
    }
    for (std::size_t i = L_.offset(3); i < L_.size(); ++i)
      if (!frozen_[i]) th[i] = std::clamp(th[i], 0.0, 1.0);
  }

  void mask(std::vector<double>& g) const {
    for (std::size_t i = 0; i < g.size(); ++i)
      if (frozen_[i]) g[i] = 0.0;
  }

 private:
  const ModelLayout& L_;
  std::vector<bool> frozen_;
};

// ---------------------------------------------------------------------------
// Local optimizer: spectral projected gradient with monotone Armijo search.

enum class StopReason { SseTolerance, ProjectedGradient, IterationCap, Stagnation, LineSearch };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::SseTolerance: return "sse_tolerance";
    case StopReason::ProjectedGradient: return "projected_gradient";
    case StopReason::IterationCap: return "iteration_cap";
    case StopReason::Stagnation: return "stagnation";
    case StopReason::LineSearch: return "line_search";
  }
  return "?";
}

struct LocalResult {
  std::vector<double> theta;
  double sse = 0;
  int iterations = 0;
  StopReason reason = StopReason::IterationCap;
};

inline LocalResult local_minimize(const ModelLayout& L, const FeasibleSet& F, std::vector<double> x,
                                  const Behavior& target, const SearchConfig& cfg,
                                  std::vector<double>* trace = nullptr) {
  constexpr double kLambdaMin = 1e-10, kLambdaMax = 1e10, kArmijo = 1e-4;
  F.project(x);
  std::vector<double> g, gn, xn(x.size()), d(x.size()), probe(x.size());
  double f = sse_and_gradient(L, x, target, &g);
  F.mask(g);
  if (trace) trace->push_back(f);

  auto pg_norm = [&](const std::vector<double>& xx, const std::vector<double>& gg) {
    for (std::size_t i = 0; i < xx.size(); ++i) probe[i] = xx[i] - gg[i];
    F.project(probe);
    double m = 0;
    for (std::size_t i = 0; i < xx.size(); ++i) m = std::max(m, std::abs(probe[i] - xx[i]));
    return m;
  };

  LocalResult out;
  double pg = pg_norm(x, g);
  double lambda = pg > 0 ? std::clamp(1.0 / pg, kLambdaMin, kLambdaMax) : 1.0;
  double f_window = f;
  int it = 0;
  for (;; ++it) {
    if (f <= cfg.sse_tol) {
      out.reason = StopReason::SseTolerance;
      break;
    }
    if (pg <= cfg.pg_tol) {
      out.reason = StopReason::ProjectedGradient;
      break;
    }
    if (it >= cfg.max_iter) {
      out.reason = StopReason::IterationCap;
      break;
    }
    if (cfg.stall_window > 0 && it > 0 && it % cfg.stall_window == 0) {
      if (f_window - f <= cfg.stall_rel * f_window) {
        out.reason = StopReason::Stagnation;
        break;
      }
      f_window = f;
    }
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - lambda * g[i];
    F.project(d);
    double gd = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      d[i] -= x[i];
      gd += g[i] * d[i];
    }
    if (!(gd < 0)) {
      out.reason = StopReason::ProjectedGradient;
      break;
    }
    double alpha = 1.0, fn = 0;
    bool ok = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < x.size(); ++i) xn[i] = x[i] + alpha * d[i];
      fn = sse_and_gradient(L, xn, target, nullptr);
      if (fn <= f + kArmijo * alpha * gd) {
        ok = true;
        break;
      }
      // Safeguarded quadratic interpolation.
      const double denom = 2 * (fn - f - alpha * gd);
      double a_new = denom > 0 ? -gd * alpha * alpha / denom : 0.5 * alpha;
      alpha = std::clamp(a_new, 0.1 * alpha, 0.5 * alpha);
    }
    if (!ok) {
      out.reason = StopReason::LineSearch;
      break;
    }
    // Convex combinations of feasible points stay feasible; re-project only
    // to remove rounding drift.
    F.project(xn);
    fn = sse_and_gradient(L, xn, target, &gn);
    if (fn > f) {  // rounding in the re-projection
      out.reason = StopReason::LineSearch;
      break;
    }
    F.mask(gn);
    double ss = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double si = xn[i] - x[i], yi = gn[i] - g[i];
      ss += si * si;
      sy += si * yi;
    }
    lambda = sy > 0 ? std::clamp(ss / sy, kLambdaMin, kLambdaMax) : kLambdaMax;
    x.swap(xn);
    g.swap(gn);
    f = fn;
    if (trace) trace->push_back(f);
    pg = pg_norm(x, g);
  }
  out.theta = std::move(x);
  out.sse = f;
  out.iterations = it;
  return out;
}

/// Outcome probabilities and their Jacobian (8 x n, row-major) with respect
/// to the flat parameters.
inline std::array<double, 8> probabilities_and_jacobian(const ModelLayout& L,
                                                        const std::vector<double>& th,
                                                        std::vector<double>& J) {
  const auto [ca, cb, cg] = L.cards();
  const std::size_t n = L.size();
  J.assign(8 * n, 0.0);
  const double* q = th.data() + L.offset(0);
  const double* r = th.data() + L.offset(1);
  const double* s = th.data() + L.offset(2);
  const double* A = th.data() + L.offset(3);
  const double* B = th.data() + L.offset(4);
  const double* C = th.data() + L.offset(5);
  std::array<double, 8> p{};
  for (std::size_t al = 0; al < ca; ++al)
    for (std::size_t be = 0; be < cb; ++be) {
      const double c1 = C[al * cb + be];
      const std::array<double, 2> pc{1 - c1, c1};
      for (std::size_t ga = 0; ga < cg; ++ga) {
        const double a1 = A[be * cg + ga], b1 = B[ga * ca + al];
        const std::array<double, 2> pa{1 - a1, a1}, pb{1 - b1, b1};
        const double rs = r[be] * s[ga], qs = q[al] * s[ga], qr = q[al] * r[be];
        const double w = qr * s[ga];
        const std::size_t iq = L.offset(0) + al, ir = L.offset(1) + be, is = L.offset(2) + ga;
        const std::size_t iA = L.offset(3) + be * cg + ga, iB = L.offset(4) + ga * ca + al,
                          iC = L.offset(5) + al * cb + be;
        for (std::size_t i = 0; i < 8; ++i) {
          const std::size_t ka = (i >> 2) & 1U, kb = (i >> 1) & 1U, kc = i & 1U;
          const double prod = pa[ka] * pb[kb] * pc[kc];
          p[i] += w * prod;
          double* row = J.data() + i * n;
          row[iq] += rs * prod;
          row[ir] += qs * prod;
          row[is] += qr * prod;
          row[iA] += (ka ? w : -w) * pb[kb] * pc[kc];
          row[iB] += (kb ? w : -w) * pa[ka] * pc[kc];
          row[iC] += (kc ? w : -w) * pa[ka] * pb[kb];
        }
      }
    }
  return p;
}

/// Latent values with zero probability leave their response entries without
/// any influence on the objective, which traps projected methods: the
/// gradient of the zero weight is computed from arbitrary responses. This
/// resets those responses (a move that leaves the objective unchanged) to
/// deterministic values minimizing the derivative of the sse with respect to
/// the zero weight, by alternating over the two tables involved. Returns true
/// if some dead latent value now has a descent direction.
inline bool revive_dead_latents(const ModelLayout& L, const FeasibleSet& F,
                                std::vector<double>& th, const Behavior& target,
                                const std::vector<double>& grad) {
  const auto [ca, cb, cg] = L.cards();
  const std::array<std::size_t, 3> card{ca, cb, cg};
  bool revived = false;
  std::array<double, 8> res{};
  {
    std::vector<double> J;
    const auto p = probabilities_and_jacobian(L, th, J);
    for (std::size_t i = 0; i < 8; ++i) res[i] = p[i] - target.p[i];
  }
  for (int b = 0; b < 3; ++b) {
    const std::size_t o = L.offset(b);
    // Reference multiplier: mean gradient over the entries carrying weight.
    double lam = 0;
    int live = 0;
    for (std::size_t j = 0; j < card[b]; ++j)
      if (th[o + j] > 0) {
        lam += grad[o + j];
        ++live;
      }
    if (live == 0) continue;
    lam /= live;
    for (std::size_t j = 0; j < card[b]; ++j) {
      if (th[o + j] > 0 || F.frozen(o + j)) continue;
      // Flat indices of the response entries that see latent value j.
      std::vector<std::size_t> idx;
      if (b == 0) {
        for (std::size_t ga = 0; ga < cg; ++ga) idx.push_back(L.offset(4) + ga * ca + j);
        for (std::size_t be = 0; be < cb; ++be) idx.push_back(L.offset(5) + j * cb + be);
      } else if (b == 1) {
        for (std::size_t al = 0; al < ca; ++al) idx.push_back(L.offset(5) + al * cb + j);
        for (std::size_t ga = 0; ga < cg; ++ga) idx.push_back(L.offset(3) + j * cg + ga);
      } else {
        for (std::size_t be = 0; be < cb; ++be) idx.push_back(L.offset(3) + be * cg + j);
        for (std::size_t al = 0; al < ca; ++al) idx.push_back(L.offset(4) + j * ca + al);
      }
      // The behavior is linear in the source vector, so the derivative with
      // respect to weight j is res . p(source = e_j).
      std::vector<double> probe = th;
      for (std::size_t k = 0; k < card[b]; ++k) probe[o + k] = (k == j) ? 1.0 : 0.0;
      auto slope = [&](const std::vector<double>& v) {
        const Behavior pj = evaluate_unchecked(L.unpack(v));
        double d = 0;
        for (std::size_t i = 0; i < 8; ++i) d += res[i] * pj.p[i];
        return 2 * d;
      };
      double best = slope(probe);
      for (int round = 0; round < 10; ++round) {
        bool changed = false;
        for (std::size_t e : idx) {
          if (F.frozen(e)) continue;
          for (double cand : {0.0, 1.0}) {
            if (cand == probe[e]) continue;
            const double keep = probe[e];
            probe[e] = cand;
            const double v = slope(probe);
            if (v < best - 1e-15) {
              best = v;
              changed = true;
            } else {
              probe[e] = keep;
            }
          }
        }
        if (!changed) break;
      }
      if (best < lam - 1e-12) {
        for (std::size_t e : idx) th[e] = probe[e];
        revived = true;
      }
    }
  }
  return revived;
}

/// Projected Levenberg-Marquardt. Each step solves the 8 x 8 system
/// (J J^T + mu I) y = r on the free coordinates (those not held at a bound by
/// the gradient), with simplex columns reduced to the tangent space, and sets
/// delta = -J^T y. Trial points are projected and accepted only if the sse
/// decreases.
inline LocalResult lm_minimize(const ModelLayout& L, const FeasibleSet& F, std::vector<double> x,
                               const Behavior& target, const SearchConfig& cfg,
                               std::vector<double>* trace = nullptr) {
  const std::size_t n = L.size();
  F.project(x);
  std::vector<double> J, g(n), xn(n), probe(n);
  std::vector<char> active(n);
  Eigen::Matrix<double, 8, 1> res;
  auto eval = [&](const std::vector<double>& th) {
    const auto p = probabilities_and_jacobian(L, th, J);
    double f = 0;
    for (std::size_t i = 0; i < 8; ++i) {
      res[static_cast<Eigen::Index>(i)] = p[i] - target.p[i];
      f += res[static_cast<Eigen::Index>(i)] * res[static_cast<Eigen::Index>(i)];
    }
    for (std::size_t j = 0; j < n; ++j) {
      double gj = 0;
      for (std::size_t i = 0; i < 8; ++i) gj += J[i * n + j] * res[static_cast<Eigen::Index>(i)];
      g[j] = F.frozen(j) ? 0.0 : 2 * gj;
    }
    return f;
  };
  auto pg_norm = [&] {
    for (std::size_t i = 0; i < n; ++i) probe[i] = x[i] - g[i];
    F.project(probe);
    double m = 0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(probe[i] - x[i]));
    return m;
  };

  double f = eval(x);
  if (trace) trace->push_back(f);
  double mu = -1;
  double f_window = f;
  LocalResult out;
  int it = 0;
  int revivals = 0;
  const int max_revivals = cfg.revive ? 4 * static_cast<int>(L.block_size(0) + L.block_size(1) +
                                                             L.block_size(2))
                                      : 0;
  auto try_revive = [&] {
    if (revivals >= max_revivals || !revive_dead_latents(L, F, x, target, g)) return false;
    ++revivals;
    f = eval(x);
    f_window = f;
    mu = -1;
    return true;
  };
  Eigen::MatrixXd Jt(8, static_cast<Eigen::Index>(n));
  for (;; ++it) {
    if (f <= cfg.sse_tol) {
      out.reason = StopReason::SseTolerance;
      break;
    }
    if (pg_norm() <= cfg.pg_tol) {
      if (try_revive()) continue;
      out.reason = StopReason::ProjectedGradient;
      break;
    }
    if (it >= cfg.max_iter) {
      out.reason = StopReason::IterationCap;
      break;
    }
    if (cfg.stall_window > 0 && it > 0 && it % cfg.stall_window == 0) {
      if (f_window - f <= cfg.stall_rel * f_window) {
        if (try_revive()) continue;
        out.reason = StopReason::Stagnation;
        break;
      }
      f_window = f;
    }
    // Free coordinates and the reduced Jacobian.
    for (std::size_t j = 0; j < n; ++j) active[j] = F.frozen(j);
    for (std::size_t j = L.offset(3); j < n; ++j)
      if ((x[j] <= 0 && g[j] > 0) || (x[j] >= 1 && g[j] < 0)) active[j] = 1;
    for (int b = 0; b < 3; ++b) {
      const std::size_t o = L.offset(b), m = L.block_size(b);
      double lam = 0;
      int cnt = 0;
      for (std::size_t j = o; j < o + m; ++j)
        if (!active[j] && x[j] > 0) {
          lam += g[j];
          ++cnt;
        }
      if (cnt) lam /= cnt;
      for (std::size_t j = o; j < o + m; ++j)
        if (!active[j] && x[j] <= 0 && g[j] >= lam) active[j] = 1;
    }
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < 8; ++i)
        Jt(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            active[j] ? 0.0 : J[i * n + j];
    for (int b = 0; b < 3; ++b) {
      const std::size_t o = L.offset(b), m = L.block_size(b);
      std::size_t cnt = 0;
      Eigen::Matrix<double, 8, 1> mean = Eigen::Matrix<double, 8, 1>::Zero();
      for (std::size_t j = o; j < o + m; ++j)
        if (!active[j]) {
          mean += Jt.col(static_cast<Eigen::Index>(j));
          ++cnt;
        }
      if (cnt == 0) continue;
      mean /= static_cast<double>(cnt);
      for (std::size_t j = o; j < o + m; ++j)
        if (!active[j]) Jt.col(static_cast<Eigen::Index>(j)) -= mean;
    }
    const Eigen::Matrix<double, 8, 8> JJ = Jt * Jt.transpose();
    if (mu < 0) mu = 1e-3 * std::max(JJ.diagonal().maxCoeff(), 1e-300);

    bool accepted = false;
    double fn = f;
    for (int tries = 0; tries < 40; ++tries) {
      Eigen::Matrix<double, 8, 8> M = JJ;
      M.diagonal().array() += mu;
      const Eigen::Matrix<double, 8, 1> y = M.ldlt().solve(res);
      const Eigen::VectorXd delta = -(Jt.transpose() * y);
      for (std::size_t j = 0; j < n; ++j) xn[j] = x[j] + delta[static_cast<Eigen::Index>(j)];
      F.project(xn);
      fn = sse_and_gradient(L, xn, target, nullptr);
      if (fn < f) {
        accepted = true;
        mu = std::max(mu / 3, 1e-300);
        break;
      }
      mu *= 4;
      if (!std::isfinite(mu)) break;
    }
    if (!accepted) {
      if (try_revive()) continue;
      out.reason = StopReason::LineSearch;
      break;
    }
    x.swap(xn);
    f = eval(x);
    if (trace) trace->push_back(f);
  }
  out.theta = std::move(x);
  out.sse = f;
  out.iterations = it;
  return out;
}

/// Runs the configured local method from x.
inline LocalResult minimize(const ModelLayout& L, const FeasibleSet& F, std::vector<double> x,
                            const Behavior& target, const SearchConfig& cfg,
                            std::vector<double>* trace = nullptr) {
  return cfg.method == LocalMethod::LevenbergMarquardt
             ? lm_minimize(L, F, std::move(x), target, cfg, trace)
             : local_minimize(L, F, std::move(x), target, cfg, trace);
}

/// Uniformly random feasible start: Dirichlet(1) sources, uniform tables.
inline std::vector<double> random_start(const ModelLayout& L, CounterRng& rng) {
  std::vector<double> th(L.size());
  for (int b = 0; b < 3; ++b)
    rng.simplex(std::span<double>(th.data() + L.offset(b), L.block_size(b)));
  for (std::size_t i = L.offset(3); i < L.size(); ++i) th[i] = rng.uniform();
  return th;
}

// ---------------------------------------------------------------------------
// Multi-start fitting.

struct RestartSummary {
  double rms = 0;
  int iterations = 0;
  StopReason reason = StopReason::IterationCap;
};

struct SearchResult {
  TriangleModel model;
  FitError error;
  int best_restart = -1;
  std::vector<RestartSummary> restarts;  // in restart order
  double wall_seconds = 0;
};

inline constexpr int kRestartBatch = 8;

inline void require_target(const Behavior& target) {
  double total = 0;
  for (double p : target.p) {
    if (!(p >= -1e-12)) throw Error(ErrorKind::InvalidInput, "target has a negative probability");
    total += p;
  }
  if (std::abs(total - 1) > 1e-9) throw Error(ErrorKind::InvalidInput, "target is not normalized");
}

inline SearchResult fit_model(const Behavior& target, const SearchConfig& cfg) {
  check_config(cfg);
  require_target(target);
  const auto t0 = std::chrono::steady_clock::now();
  const ModelLayout L(cfg.cards);
  const FeasibleSet F(L);
  SearchResult out;
  std::vector<LocalResult> best_local(1);
  double best_sse = std::numeric_limits<double>::infinity();

  for (int start = 0; start < cfg.restarts; start += kRestartBatch) {
    const int count = std::min(kRestartBatch, cfg.restarts - start);
    auto batch = parallel_map<LocalResult>(static_cast<std::size_t>(count), cfg.threads,
                                           [&](std::size_t k) {
                                             CounterRng rng(derive_stream(cfg.seed, start + k));
                                             return minimize(L, F, random_start(L, rng),
                                                                   target, cfg);
                                           });
    for (int k = 0; k < count; ++k) {
      const auto& lr = batch[static_cast<std::size_t>(k)];
      out.restarts.push_back({std::sqrt(lr.sse / 8), lr.iterations, lr.reason});
      if (lr.sse < best_sse) {  // strict: ties keep the lower restart index
        best_sse = lr.sse;
        best_local[0] = lr;
        out.best_restart = start + k;
      }
    }
    if (cfg.early_stop_rms > 0 && std::sqrt(best_sse / 8) <= cfg.early_stop_rms) break;
  }
  out.model = L.unpack(best_local[0].theta);
  out.error = fit_error(out.model, target);
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

inline SearchResult fit_model(const Correlators& c, const SearchConfig& cfg) {
  return fit_model(correlators_to_behavior(c), cfg);
}

/// Rounds entries within `snap` of 0 or 1, freezes them and re-optimizes the
/// remaining parameters from the given model.
inline SearchResult snap_and_refit(const TriangleModel& m, const Behavior& target,
                                   const SearchConfig& cfg, double snap = 1e-3) {
  require_target(target);
  const ModelLayout L(m.cardinalities());
  FeasibleSet F(L);
  std::vector<double> th = L.pack(m);
  for (std::size_t i = 0; i < th.size(); ++i) {
    if (th[i] <= snap) {
      th[i] = 0.0;
      F.freeze(i);
    } else if (th[i] >= 1 - snap) {
      th[i] = 1.0;
      F.freeze(i);
    }
  }
  // A source with every entry frozen must still sum to one.
  for (int b = 0; b < 3; ++b) {
    const std::size_t o = L.offset(b), n = L.block_size(b);
    double sum = 0;
    bool all_frozen = true;
    for (std::size_t i = o; i < o + n; ++i) {
      sum += th[i];
      all_frozen = all_frozen && F.frozen(i);
    }
    if (all_frozen && std::abs(sum - 1) > 1e-12)
      throw Error(ErrorKind::InvalidModel, "snapping leaves a source that does not sum to 1");
  }
  SearchConfig local = cfg;
  local.cards = m.cardinalities();
  const auto t0 = std::chrono::steady_clock::now();
  const LocalResult lr = minimize(L, F, th, target, local);
  SearchResult out;
  out.model = L.unpack(lr.theta);
  out.error = fit_error(out.model, target);
  out.best_restart = 0;
  out.restarts.push_back({out.error.rms, lr.iterations, lr.reason});
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---------------------------------------------------------------------------
// Plane scans and boundary validation.

struct ScanPoint {
  Correlators point;
  double rms = 0;
};

struct ScanReport {
  PlaneSpec plane;
  int resolution = 0;
  SearchConfig config;
  std::vector<ScanPoint> grid;
};

/// Fits every valid grid point of the plane. Point i uses the seed
/// derive_stream(cfg.seed, i); points are distributed over cfg.threads and
/// each fit runs single-threaded.
inline ScanReport scan_plane(const PlaneSpec& spec, int resolution, const SearchConfig& cfg) {
  check_config(cfg);
  ScanReport rep{spec, resolution, cfg, {}};
  const auto pts = plane_grid(spec, resolution);
  rep.grid = parallel_map<ScanPoint>(pts.size(), cfg.threads, [&](std::size_t i) {
    SearchConfig c = cfg;
    c.threads = 1;
    c.seed = derive_stream(cfg.seed, i);
    return ScanPoint{pts[i], fit_model(pts[i], c).error.rms};
  });
  return rep;
}

struct ValidationPoint {
  FamilyParams params;
  Correlators original;
  Correlators displaced;
  double original_rms = 0;
  double displaced_rms = 0;
  Correlators displaced_fit;       // symmetrized behavior of the displaced fit
  bool fit_beyond_boundary = false;  // displaced_fit fails the conjectured local set
};

struct ValidationReport {
  FamilyId family;
  double displacement = 0;
  SearchConfig config;
  std::vector<ValidationPoint> points;
  // Displaced points fitted below the threshold by a model whose own
  // behavior lies outside the conjectured local set.
  std::size_t violations = 0;
  std::size_t displaced_below_threshold = 0;
  double original_fit_fraction = 0;    // original points fitted below the threshold
  double median_original_rms = 0;
  double median_displaced_rms = 0;
  double median_log10_ratio = 0;       // median of log10(displaced / original)
};

/// Archetype the validation displaces toward: GHZ for the GHZ family, W (or
/// its relabeling for flipped families) otherwise.
inline Correlators displacement_target(FamilyId f) {
  if (f.kind == FamilyKind::GHZ) return archetype::GHZ;
  return f.flipped ? archetype::Wbar : archetype::W;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Point at Euclidean distance `displacement` from p toward the family's
/// archetype.
inline Correlators displaced_point(FamilyId f, const Correlators& p, double displacement) {
  const Correlators goal = displacement_target(f);
  const double d = distance(p, goal);
  return d > 0 ? lerp(p, goal, std::min(1.0, displacement / d)) : goal;
}

/// Samples n points of the family surface whose displaced copy lies outside
/// the conjectured local set (parts of a surface that lie inside the local
/// region of another surface are not boundary), moves each a Euclidean
/// distance `displacement` toward the family's archetype and fits both.
/// Original fits may stop early at `original_early_stop` (rms); displaced
/// fits always run every restart.
inline ValidationReport validate_boundary(FamilyId f, std::size_t n, double displacement,
                                          const SearchConfig& cfg,
                                          double original_early_stop = 1e-7) {
  if (!(displacement > 0)) throw Error(ErrorKind::InvalidInput, "displacement must be > 0");
  check_config(cfg);
  ValidationReport rep;
  rep.family = f;
  rep.displacement = displacement;
  rep.config = cfg;
  const auto samples = sample_boundary_with_params(f, n, cfg.seed, [&](const BoundarySample& b) {
    const Correlators moved = displaced_point(f, b.point, displacement);
    return is_valid(moved) && classify(moved).nonlocal();
  });

  // Work item 2i fits original i, 2i+1 fits displaced i.
  std::vector<Correlators> targets;
  for (const auto& s : samples) {
    targets.push_back(s.point);
    targets.push_back(displaced_point(f, s.point, displacement));
  }
  struct Fit {
    double rms;
    Correlators sym;
  };
  const auto fits = parallel_map<Fit>(targets.size(), cfg.threads, [&](std::size_t i) {
    SearchConfig c = cfg;
    c.threads = 1;
    c.seed = derive_stream(cfg.seed ^ 0x5A5A5A5AULL, i);
    c.early_stop_rms = (i % 2 == 0) ? original_early_stop : 0.0;
    const SearchResult r = fit_model(targets[i], c);
    return Fit{r.error.rms, symmetrized_correlators(evaluate(r.model, 1e-9, true))};
  });

  std::vector<double> orig, disp, ratio;
  std::size_t fitted = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ValidationPoint vp{samples[i].params, targets[2 * i], targets[2 * i + 1],
                       fits[2 * i].rms,   fits[2 * i + 1].rms, fits[2 * i + 1].sym};
    vp.fit_beyond_boundary = is_valid(vp.displaced_fit, 1e-9) && classify(vp.displaced_fit).nonlocal();
    if (vp.displaced_rms < cfg.local_threshold) {
      ++rep.displaced_below_threshold;
      if (vp.fit_beyond_boundary) ++rep.violations;
    }
    if (vp.original_rms < cfg.local_threshold) ++fitted;
    orig.push_back(vp.original_rms);
    disp.push_back(vp.displaced_rms);
    ratio.push_back(std::log10(vp.displaced_rms / std::max(vp.original_rms, 1e-300)));
    rep.points.push_back(vp);
  }
  rep.original_fit_fraction = static_cast<double>(fitted) / static_cast<double>(samples.size());
  rep.median_original_rms = median(orig);
  rep.median_displaced_rms = median(disp);
  rep.median_log10_ratio = median(ratio);
  return rep;
}

}  // namespace trilocal
