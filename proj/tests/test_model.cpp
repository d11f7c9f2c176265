#include <gtest/gtest.h>

#include <boost/rational.hpp>

#include "support.hpp"

using namespace trilocal;
using testsupport::kCases;
using Q = boost::rational<long long>;

namespace {

std::vector<double>& block_of(TriangleModel& m, int block) {
  switch (block) {
    case 0: return m.q;
    case 1: return m.r;
    case 2: return m.s;
    case 3: return m.A.data;
    case 4: return m.B.data;
    default: return m.C.data;
  }
}

}  // namespace

TEST(Model, UniformThirdsIsExactInRationals) {
  const auto m = uniform_thirds_model<Q>();
  const auto b = evaluate(m);
  EXPECT_EQ(b.total(), Q(1));
  EXPECT_EQ(asymmetry(b), 0.0);
  const auto c = behavior_to_correlators(b, 0.0);
  EXPECT_EQ(c.e1, Q(1, 3));
  EXPECT_EQ(c.e2, Q(-5, 27));
  EXPECT_EQ(c.e3, Q(-5, 9));
}

TEST(Model, NormalizationIsExactInRationals) {
  CounterRng rng(21);
  for (int i = 0; i < kCases; ++i) {
    const std::size_t ca = 1 + rng.next_u64() % 4, cb = 1 + rng.next_u64() % 4,
                      cg = 1 + rng.next_u64() % 4;
    auto draw_simplex = [&](std::size_t n) {
      std::vector<Q> v(n);
      long long rest = 60;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        const long long w = static_cast<long long>(rng.next_u64() % (rest + 1));
        v[k] = Q(w, 60);
        rest -= w;
      }
      v[n - 1] = Q(rest, 60);
      return v;
    };
    BasicTriangleModel<Q> m;
    m.q = draw_simplex(ca);
    m.r = draw_simplex(cb);
    m.s = draw_simplex(cg);
    m.A = Table<Q>(cb, cg);
    m.B = Table<Q>(cg, ca);
    m.C = Table<Q>(ca, cb);
    for (auto* t : {&m.A, &m.B, &m.C})
      for (Q& x : t->data) x = Q(static_cast<long long>(rng.next_u64() % 13), 12);
    const auto b = evaluate(m);
    ASSERT_EQ(b.total(), Q(1));
    for (const Q& p : b.p) EXPECT_GE(p, Q(0));
  }
}

TEST(Model, EvaluateIsMultilinear) {
  // Each parameter block enters linearly: a convex mix of two values of one
  // block yields the same mix of the behaviors.
  CounterRng rng(22);
  for (int i = 0; i < kCases; ++i) {
    const TriangleModel m0 = testsupport::random_model(rng, 3, 2, 4);
    const TriangleModel m1 = testsupport::random_model(rng, 3, 2, 4);
    const double t = rng.uniform();
    const int block = static_cast<int>(rng.next_u64() % 6);
    TriangleModel mix = m0, other = m0, src = m1;
    auto& dst = block_of(mix, block);
    auto& alt = block_of(other, block);
    TriangleModel base = m0;
    const auto& lo = block_of(base, block);
    const auto& hi = block_of(src, block);
    for (std::size_t k = 0; k < dst.size(); ++k) {
      dst[k] = (1 - t) * lo[k] + t * hi[k];
      alt[k] = hi[k];
    }
    const Behavior b0 = evaluate(m0), b1 = evaluate(other), bm = evaluate(mix);
    for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(bm.p[k], (1 - t) * b0.p[k] + t * b1.p[k], 1e-14);
  }
}

TEST(Model, FlipOutcomesRelabelsBehavior) {
  CounterRng rng(23);
  for (int i = 0; i < kCases; ++i) {
    const TriangleModel m = testsupport::random_model(rng, 2, 3, 2);
    const Behavior b = evaluate(m), f = evaluate(flip_outcomes(m));
    for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(f.p[k], b.p[7 - k], 1e-15);
  }
}

TEST(Model, ConstantModelIsProductDistribution) {
  const Behavior b = evaluate(constant_model(2, 3, 4, 0.25));
  EXPECT_NEAR(b(1, 1, 1), 0.25 * 0.25 * 0.25, 1e-15);
  EXPECT_NEAR(b(-1, -1, -1), 0.75 * 0.75 * 0.75, 1e-15);
}

TEST(Model, ChecksRejectMalformedModels) {
  auto kind_of = [](const TriangleModel& m) {
    try {
      evaluate(m);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::InvalidInput;
  };
  TriangleModel m = constant_model(2, 2, 2, 0.5);
  m.q = {0.7, 0.7};
  EXPECT_EQ(kind_of(m), ErrorKind::InvalidModel);
  m = constant_model(2, 2, 2, 0.5);
  m.A(0, 0) = 1.5;
  EXPECT_EQ(kind_of(m), ErrorKind::InvalidModel);
  m = constant_model(2, 2, 2, 0.5);
  m.B = Table<double>(3, 2, 0.5);
  EXPECT_EQ(kind_of(m), ErrorKind::InvalidModel);
  EXPECT_EQ(kind_of(constant_model(7, 2, 2, 0.5)), ErrorKind::InvalidModel);
  EXPECT_NO_THROW(evaluate(constant_model(7, 2, 2, 0.5), 1e-12, true));
}

TEST(Model, FitErrorIsRootMeanSquare) {
  const Behavior a = correlators_to_behavior(archetype::U);
  const Behavior b = correlators_to_behavior(archetype::GHZ);
  const FitError e = fit_error(a, b);
  // U is 1/8 everywhere, GHZ is 1/2 on two entries.
  EXPECT_NEAR(e.sse, 2 * 0.375 * 0.375 + 6 * 0.125 * 0.125, 1e-15);
  EXPECT_NEAR(e.rms, std::sqrt(e.sse / 8), 1e-15);
}
