#pragma once

#include <cmath>
#include <cstdint>

#include "trilocal/trilocal.hpp"

namespace testsupport {

inline constexpr int kCases = 1000;

/// Uniform point of the correlator cube, rejected until it is a valid behavior.
inline trilocal::Correlators random_valid(trilocal::CounterRng& rng) {
  for (;;) {
    const trilocal::Correlators c{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    if (trilocal::is_valid(c)) return c;
  }
}

/// Random model with the given cardinalities; sources drawn on the simplex,
/// responses uniform in [0, 1].
inline trilocal::TriangleModel random_model(trilocal::CounterRng& rng, std::size_t ca,
                                            std::size_t cb, std::size_t cg) {
  trilocal::TriangleModel m;
  m.q.resize(ca);
  m.r.resize(cb);
  m.s.resize(cg);
  rng.simplex(m.q);
  rng.simplex(m.r);
  rng.simplex(m.s);
  m.A = trilocal::Table<double>(cb, cg);
  m.B = trilocal::Table<double>(cg, ca);
  m.C = trilocal::Table<double>(ca, cb);
  for (auto* t : {&m.A, &m.B, &m.C})
    for (double& x : t->data) x = rng.uniform();
  return m;
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

}  // namespace testsupport
