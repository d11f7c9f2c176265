#pragma once

// Bell inequalities for symmetric triangle-local behaviors and the three
// nonlocality tests built from them.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "trilocal/behavior.hpp"
#include "trilocal/error.hpp"
#include "trilocal/w5.hpp"

namespace trilocal {

enum class IneqStatus { Satisfied, Violated, InapplicableSatisfied, InapplicableViolated };

inline const char* to_string(IneqStatus s) {
  switch (s) {
    case IneqStatus::Satisfied: return "Satisfied";
    case IneqStatus::Violated: return "Violated";
    case IneqStatus::InapplicableSatisfied: return "InapplicableSatisfied";
    case IneqStatus::InapplicableViolated: return "InapplicableViolated";
  }
  return "?";
}

struct IneqResult {
  IneqStatus status = IneqStatus::Satisfied;
  std::optional<double> residual;

  bool violated() const {
    return status == IneqStatus::Violated || status == IneqStatus::InapplicableViolated;
  }
};

inline constexpr double kDefaultIneqTol = 1e-9;

namespace detail {

inline void require_valid(const Correlators& c) {
  if (!is_valid(c)) throw Error(ErrorKind::InvalidInput, "behavior outside the tetrahedron");
}

inline IneqResult judge(double lhs, double tol) {
  return {lhs >= -tol ? IneqStatus::Satisfied : IneqStatus::Violated, lhs};
}

inline IneqResult inapplicable_violated() { return {IneqStatus::InapplicableViolated, std::nullopt}; }

// Auxiliary conditions are polynomial identities that hold with equality at
// some boundary points, so they get a looser slack than the inequalities.
inline constexpr double kAuxSlack = 1e-9;

}  // namespace detail

// ---------------------------------------------------------------------------
// GHZ-type inequality.

struct GhzTerms {
  double s = 0;     // 3 + 5E1 + E2 - E3
  double disc = 0;  // s^2 - 8(1+E1)^3
  double poly = 0;  // polynomial part
  double branch = 0;  // coefficient of sqrt(disc)
};

inline GhzTerms ghz_terms(const Correlators& c) {
  const double E1 = c.e1, E2 = c.e2, E3 = c.e3;
  GhzTerms t;
  t.s = 3 + 5 * E1 + E2 - E3;
  const double p1 = (1 + E1) * (1 + E1) * (1 + E1);
  t.disc = t.s * t.s - 8 * p1;
  const double s2 = t.s * t.s;
  t.poly = 8 * p1 *
               (11 + 37 * E1 + 28 * E1 * E1 - 4 * E1 * E1 * E1 + 8 * E2 + 13 * E1 * E2 + E2 * E2 -
                11 * E3 - 18 * E1 * E3 - 3 * E2 * E3 + 2 * E3 * E3) -
           s2 * s2;
  t.branch = s2 * t.s - 4 * p1 * (7 + 11 * E1 + E2 - 3 * E3);
  return t;
}

/// LHS of the GHZ-type inequality normalized by max(1, s^4); nullopt where
/// the square-root argument is negative.
inline std::optional<double> ghz_lhs(const Correlators& c) {
  const GhzTerms t = ghz_terms(c);
  if (t.disc < 0) return std::nullopt;
  const double s4 = t.s * t.s * t.s * t.s;
  return (t.poly + std::sqrt(t.disc) * t.branch) / std::max(1.0, s4);
}

inline IneqResult ghz_inequality(const Correlators& c, double tol = kDefaultIneqTol) {
  detail::require_valid(c);
  const auto lhs = ghz_lhs(c);
  if (!lhs) return {IneqStatus::InapplicableSatisfied, std::nullopt};
  return detail::judge(*lhs, tol);
}

inline bool ghz_test(const Correlators& c, double tol = kDefaultIneqTol) {
  return ghz_inequality(c, tol).violated() && ghz_inequality(relabel(c), tol).violated();
}

// ---------------------------------------------------------------------------
// W-type inequalities.

inline double w1_lhs(const Correlators& c, double tol = kDefaultIneqTol) {
  const double E1 = c.e1, E2 = c.e2, E3 = c.e3;
  double rad = (1 + E2) * (1 + E2) - 4 * E1 * E1;
  if (rad < -tol) throw Error(ErrorKind::InvalidInput, "negative radicand in W1 inequality");
  rad = std::max(rad, 0.0);
  return -E1 * E2 + E3 + (1 - E1) * std::sqrt(rad);
}

inline double w2_lhs(const Correlators& c) {
  const double E1 = c.e1, E2 = c.e2, E3 = c.e3;
  const double E1_2 = E1 * E1, E1_3 = E1_2 * E1, E1_4 = E1_3 * E1, E1_5 = E1_4 * E1;
  return 8 * E1_5 - 15 * E1_4 - 16 * E1_3 * E2 + 22 * E1_3 + 16 * E1_2 * E2 * E2 -
         2 * E1_2 * E2 - 20 * E1_2 - 6 * E1 * E2 * E2 + 12 * E1 * E2 + 10 * E1 - E2 * E2 - 6 * E2 +
         E3 * E3 * (E1_2 - 2 * E1 + 2) +
         E3 * (6 * E1_3 - 8 * E1_2 * E2 - 12 * E1_2 + 10 * E1 * E2 + 10 * E1 - 8 * E2) - 1;
}

inline double w3_lhs(const Correlators& c) {
  const double E1 = c.e1, E2 = c.e2, E3 = c.e3;
  const double E1_2 = E1 * E1;
  return 2 * (1 + E1) * E3 * E3 * E3 +
         27 * (1 - 3 * E1 + 4 * E1_2 + E2 - 2 * E1 * E2) *
             (1 - E1 + 2 * E1_2 * E1 + 2 * E2 - E1 * E2 + E2 * E2) +
         54 * E1 * E3 * (2 - 5 * E1 + 5 * E1_2 + 3 * E2 - 4 * E1 * E2 + E2 * E2) -
         9 * E3 * E3 * (1 - 2 * E1 - 6 * E1_2 + E2 + 2 * E1 * E2);
}

/// First auxiliary condition of the W3 inequality (must be >= 0).
inline double w3_aux_a(double E1, double E2) {
  const double e2 = E2, e2_2 = e2 * e2, e2_3 = e2_2 * e2, e2_4 = e2_3 * e2, e2_5 = e2_4 * e2;
  // Horner in E1, coefficients listed from E1^12 down to E1^0.
  const double c[13] = {
      -2048,
      8 * (479 + 128 * e2),
      -36 * (153 + 61 * e2),
      -6 * (2033 + 466 * e2 + 177 * e2_2),
      3 * (6687 + 7809 * e2 + 181 * e2_2 + 243 * e2_3),
      -4 * (2021 + 7383 * e2 + 3159 * e2_2 - 351 * e2_3),
      8 * (177 + 3460 * e2 + 264 * e2_2 - 171 * e2_3),
      -4 * (2303 + 581 * e2 + 10892 * e2_2 - 39 * e2_3 - 621 * e2_4),
      2 * (8625 + 12715 * e2 - 9853 * e2_2 + 9081 * e2_3 + 1728 * e2_4),
      -4 * (2335 + 11013 * e2 + 8469 * e2_2 - 4405 * e2_3 - 666 * e2_4),
      4 * (125 + 3175 * e2 + 7926 * e2_2 + 5032 * e2_3 - 212 * e2_4 - 108 * e2_5),
      506 + 624 * e2 - 2682 * e2_2 - 5100 * e2_3 - 2268 * e2_4,
      -71 - 369 * e2 - 477 * e2_2 - 243 * e2_3,
  };
  double acc = 0;
  for (double k : c) acc = acc * E1 + k;
  return acc;
}

/// Second auxiliary condition of the W3 inequality (must be >= 0).
inline double w3_aux_b(double E1, double E2) {
  return 4 * E1 * E1 * (3 - 2 * E1 + E2 + E1 * E1) - (1 - 2 * E1) * (1 + E2) * (1 + E2);
}

inline const double kW3MinE3 = 6 - 3 * std::sqrt(5.0);
inline constexpr double kW4MaxAux = 29.0 / 27.0;

inline double w4_lhs(const Correlators& c) {
  const double E1 = c.e1, E2 = c.e2;
  const double O = 1 - c.e3;
  const double a2 = E1 * E1, a3 = a2 * E1, a4 = a3 * E1, a5 = a4 * E1, a6 = a5 * E1,
               a7 = a6 * E1, a8 = a7 * E1;
  const double b2 = E2 * E2, b3 = b2 * E2, b4 = b3 * E2, b5 = b4 * E2;
  const double O2 = O * O, O3 = O2 * O, O4 = O3 * O, O5 = O4 * O;
  return O4 * (2 + E1 + 9 * a2 - 2 * a3 - 3 * E2 - 7 * E1 * E2) +
         2 * O3 * (E1 - E2) * (3 * E1 - 17 * a2 + 4 * a3 + E2 + 9 * E1 * E2) -
         2 * O2 *
             (30 * a2 - 65 * a3 + 43 * a4 - 18 * a5 - 8 * E2 + 4 * E1 * E2 + a2 * E2 +
              21 * a3 * E2 + 12 * a4 * E2 - 2 * b2 + 17 * E1 * b2 - 43 * a2 * b2 - 2 * a3 * b2 -
              b3 + 11 * E1 * b3) -
         O * (16 * a2 - 128 * a3 + 261 * a4 - 227 * a5 + 88 * a6 - 16 * E2 + 80 * E1 * E2 -
              300 * a3 * E2 + 428 * a4 * E2 - 232 * a5 * E2 - 48 * b2 + 128 * E1 * b2 -
              58 * a2 * b2 - 130 * a3 * b2 + 168 * a4 * b2 - 32 * b3 + 68 * E1 * b3 -
              36 * a2 * b3 - 40 * a3 * b3 - 3 * b4 + 13 * E1 * b4) -
         O5 * (1 + E1) + 48 * a3 - 6 * a4 - 515 * a5 + 1101 * a6 - 882 * a7 + 256 * a8 -
         48 * E1 * E2 + 48 * a2 * E2 + 280 * a3 * E2 - 467 * a4 * E2 - 71 * a5 * E2 +
         504 * a6 * E2 - 256 * a7 * E2 + 48 * b2 - 224 * E1 * b2 + 220 * a2 * b2 +
         298 * a3 * b2 - 598 * a4 * b2 + 212 * a5 * b2 + 64 * a6 * b2 + 64 * b3 - 200 * E1 * b3 +
         82 * a2 * b3 + 218 * a3 * b3 - 184 * a4 * b3 + 26 * b4 - 39 * E1 * b4 - 7 * a2 * b4 +
         30 * a3 * b4 + b5 - 3 * E1 * b5;
}

inline IneqResult w_inequality_1(const Correlators& c, double tol = kDefaultIneqTol) {
  detail::require_valid(c);
  return detail::judge(w1_lhs(c, tol), tol);
}

inline IneqResult w_inequality_2(const Correlators& c, double tol = kDefaultIneqTol) {
  detail::require_valid(c);
  if (c.e1 < 1.0 / 3.0 - detail::kAuxSlack) return detail::inapplicable_violated();
  return detail::judge(w2_lhs(c), tol);
}

inline IneqResult w_inequality_3(const Correlators& c, double tol = kDefaultIneqTol) {
  detail::require_valid(c);
  // w3_aux_a has coefficients up to ~2e4; scale the slack accordingly.
  if (w3_aux_a(c.e1, c.e2) < -1e4 * detail::kAuxSlack ||
      w3_aux_b(c.e1, c.e2) < -detail::kAuxSlack || c.e3 < kW3MinE3 - detail::kAuxSlack)
    return detail::inapplicable_violated();
  return detail::judge(w3_lhs(c), tol);
}

inline IneqResult w_inequality_4(const Correlators& c, double tol = kDefaultIneqTol) {
  detail::require_valid(c);
  if (c.e1 - c.e2 - c.e3 > kW4MaxAux + detail::kAuxSlack) return detail::inapplicable_violated();
  return detail::judge(w4_lhs(c), tol);
}

inline IneqResult w_inequality_5(const Correlators& c, double tol = kDefaultIneqTol,
                                 const w5::SolverOptions& opt = {}) {
  detail::require_valid(c);
  const w5::W5Solution sol = w5::f_w5(c.e1, c.e2, opt);
  switch (sol.status) {
    case w5::W5Status::Infeasible: return detail::inapplicable_violated();
    case w5::W5Status::NotConverged:
      throw Error(ErrorKind::SolverFailure, "boundary solver did not converge");
    case w5::W5Status::Feasible: break;
  }
  return detail::judge(c.e3 - sol.e3, tol);
}

inline std::vector<IneqResult> w_inequalities(const Correlators& c, double tol = kDefaultIneqTol,
                                              const w5::SolverOptions& opt = {}) {
  return {w_inequality_1(c, tol), w_inequality_2(c, tol), w_inequality_3(c, tol),
          w_inequality_4(c, tol), w_inequality_5(c, tol, opt)};
}

inline bool all_violated(const std::vector<IneqResult>& rs) {
  for (const auto& r : rs)
    if (!r.violated()) return false;
  return true;
}

/// True iff all five W inequalities are violated. Stops at the first
/// satisfied one; w_inequalities gives the full vector.
inline bool w_test(const Correlators& c, double tol = kDefaultIneqTol,
                   const w5::SolverOptions& opt = {}) {
  detail::require_valid(c);
  if (!w_inequality_1(c, tol).violated()) return false;
  if (!w_inequality_2(c, tol).violated()) return false;
  if (!w_inequality_3(c, tol).violated()) return false;
  if (!w_inequality_4(c, tol).violated()) return false;
  return w_inequality_5(c, tol, opt).violated();
}

inline bool wbar_test(const Correlators& c, double tol = kDefaultIneqTol,
                      const w5::SolverOptions& opt = {}) {
  return w_test(relabel(c), tol, opt);
}

// ---------------------------------------------------------------------------
// Classification.

enum class VerdictLabel { NonlocalGHZ, NonlocalW, NonlocalWbar, ConjecturedLocal, InvalidBehavior };

inline const char* to_string(VerdictLabel v) {
  switch (v) {
    case VerdictLabel::NonlocalGHZ: return "NonlocalGHZ";
    case VerdictLabel::NonlocalW: return "NonlocalW";
    case VerdictLabel::NonlocalWbar: return "NonlocalWbar";
    case VerdictLabel::ConjecturedLocal: return "ConjecturedLocal";
    case VerdictLabel::InvalidBehavior: return "InvalidBehavior";
  }
  return "?";
}

struct Verdict {
  VerdictLabel label = VerdictLabel::InvalidBehavior;
  std::vector<VerdictLabel> passing;  // every test that fired, in GHZ, W, Wbar order
  std::vector<IneqResult> ghz;        // inequality on c, then on relabel(c)
  std::vector<IneqResult> w;          // W1..W5 on c
  std::vector<IneqResult> wbar;       // W1..W5 on relabel(c)

  bool nonlocal() const {
    return label == VerdictLabel::NonlocalGHZ || label == VerdictLabel::NonlocalW ||
           label == VerdictLabel::NonlocalWbar;
  }
};

inline Verdict classify(const Correlators& c, double tol = kDefaultIneqTol,
                        const w5::SolverOptions& opt = {}) {
  Verdict v;
  if (!is_valid(c)) return v;
  const Correlators r = relabel(c);
  v.ghz = {ghz_inequality(c, tol), ghz_inequality(r, tol)};
  v.w = w_inequalities(c, tol, opt);
  v.wbar = w_inequalities(r, tol, opt);
  if (all_violated(v.ghz)) v.passing.push_back(VerdictLabel::NonlocalGHZ);
  if (all_violated(v.w)) v.passing.push_back(VerdictLabel::NonlocalW);
  if (all_violated(v.wbar)) v.passing.push_back(VerdictLabel::NonlocalWbar);
  v.label = v.passing.empty() ? VerdictLabel::ConjecturedLocal : v.passing.front();
  return v;
}

// ---------------------------------------------------------------------------
// Comparison envelopes.

/// No-signalling-and-independence bound 2(1-E1)^3 - (1-2E1+E2)^2 (>= 0 inside).
inline double nsi_residual(const Correlators& c) {
  const double a = 1 - c.e1;
  const double b = 1 - 2 * c.e1 + c.e2;
  return 2 * a * a * a - b * b;
}

/// The GHZ-type inequality restricted to E1 = 0; vanishes on the local
/// boundary of that plane.
inline double e1zero_boundary_residual(double e2, double e3) {
  const double ae3 = std::abs(e3);
  const double u = (3 + e2 - ae3) / 2;
  if (u * u < 2) throw Error(ErrorKind::ComplexBranch, "u^2 < 2");
  const double du = u * u - 1;
  return 1 + du * du - u * (2 - ae3) + (2 - ae3 + u - u * u * u) * std::sqrt(u * u - 2);
}

}  // namespace trilocal
