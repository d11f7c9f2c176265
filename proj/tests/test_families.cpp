#include <gtest/gtest.h>

#include "support.hpp"

using namespace trilocal;
using testsupport::kCases;

TEST(Families, GhzClosedFormMatchesEnumerationAndSaturates) {
  const auto samples = sample_boundary_with_params({FamilyKind::GHZ, false}, kCases, 41);
  ASSERT_EQ(samples.size(), static_cast<std::size_t>(kCases));
  for (const auto& s : samples) {
    const Correlators closed = ghz_family_correlators(s.params.x, s.params.y);
    const Correlators enumerated =
        behavior_to_correlators(evaluate(build_model({FamilyKind::GHZ, false}, s.params)));
    EXPECT_NEAR(closed.e1, enumerated.e1, 1e-12);
    EXPECT_NEAR(closed.e2, enumerated.e2, 1e-12);
    EXPECT_NEAR(closed.e3, enumerated.e3, 1e-12);
    const auto lhs = ghz_lhs(closed);
    ASSERT_TRUE(lhs.has_value());
    EXPECT_LE(std::abs(*lhs), 1e-8);
  }
}

TEST(Families, W1QuarticRoot) {
  const double x = x_max_w1();
  EXPECT_NEAR(x, 0.1916, 5e-4);
  EXPECT_LT(std::abs(9 * std::pow(x, 4) - 24 * std::pow(x, 3) + 24 * x * x - 9 * x + 1), 1e-12);
  EXPECT_NEAR(x, x_max_w1_radical(), 1e-12);
}

TEST(Families, SampledModelsAreValidAndSymmetric) {
  for (FamilyKind k : kAllFamilies) {
    if (k == FamilyKind::W5) continue;
    for (bool flipped : {false, true}) {
      const FamilyId f{k, flipped};
      SCOPED_TRACE(to_string(f));
      const auto samples = sample_boundary_with_params(f, 200, 42);
      for (const auto& s : samples) {
        const TriangleModel m = build_model(f, s.params);
        ASSERT_NO_THROW(check_model(m));
        const Behavior b = evaluate(m);
        EXPECT_LE(asymmetry(b), 1e-9);
        const Correlators c = behavior_to_correlators(b);
        EXPECT_TRUE(is_valid(c, 1e-12));
        EXPECT_NEAR(c.e1, s.point.e1, 1e-12);
        EXPECT_NEAR(c.e2, s.point.e2, 1e-12);
        EXPECT_NEAR(c.e3, s.point.e3, 1e-12);
      }
    }
  }
}

TEST(Families, FlippedFamilyIsRelabeled) {
  for (FamilyKind k : kAllFamilies) {
    if (k == FamilyKind::W5) continue;
    const auto plain = sample_boundary_with_params({k, false}, 50, 43);
    for (const auto& s : plain) {
      const Correlators f = boundary_point({k, true}, s.params);
      const Correlators r = relabel(s.point);
      EXPECT_NEAR(f.e1, r.e1, 1e-12);
      EXPECT_NEAR(f.e2, r.e2, 1e-12);
      EXPECT_NEAR(f.e3, r.e3, 1e-12);
    }
  }
}

TEST(Families, W5SamplesLieOnSolverBoundary) {
  const auto samples = sample_boundary_with_params({FamilyKind::W5, false}, 20, 44);
  for (const auto& s : samples) {
    EXPECT_EQ(s.point.e1, s.params.x);
    EXPECT_EQ(s.point.e2, s.params.y);
    EXPECT_TRUE(is_valid(s.point, 1e-9));
    const TriangleModel m = build_model({FamilyKind::W5, false}, s.params);
    const Correlators c = behavior_to_correlators(evaluate(m, 1e-9), 1e-8);
    EXPECT_NEAR(c.e3, s.point.e3, 1e-7);
  }
}

TEST(Families, SamplingIsDeterministicPerSeed) {
  const FamilyId f{FamilyKind::W3, false};
  const auto a = sample_boundary(f, 100, 7), b = sample_boundary(f, 100, 7),
             c = sample_boundary(f, 100, 8);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  // Sample i depends only on (seed, i).
  const auto prefix = sample_boundary(f, 10, 7);
  EXPECT_TRUE(std::equal(prefix.begin(), prefix.end(), a.begin()));
}

TEST(Families, DomainErrors) {
  EXPECT_THROW(sample_boundary({FamilyKind::GHZ, false}, 0, 1), Error);
  try {
    build_model({FamilyKind::GHZ, false}, {0.8, 0.8});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OutOfDomain);
  }
  EXPECT_FALSE(in_domain({FamilyKind::W1, false}, {0.3, 0.5}));
  EXPECT_FALSE(in_domain({FamilyKind::W3, false}, {0.1, 0.2}));
  EXPECT_FALSE(in_domain({FamilyKind::W4, false}, {1.5, 0.5}));
  EXPECT_FALSE(in_domain({FamilyKind::GHZ, false}, {NAN, 0.5}));
}

TEST(Families, NamesRoundTrip) {
  for (FamilyKind k : kAllFamilies)
    for (bool flipped : {false, true}) {
      const FamilyId f{k, flipped};
      EXPECT_EQ(parse_family(to_string(f)), f);
    }
  EXPECT_THROW(parse_family("w6"), Error);
  EXPECT_THROW(parse_family("-flipped"), Error);
}
