#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "levyref/levy_model.hpp"
#include "test_util.hpp"

using namespace levyref;
using namespace levyref::testing;

TEST(LaplaceExponent, HandValues) {
  LevyModel m = cl_a();
  EXPECT_DOUBLE_EQ(laplace_exponent(m, DriftShift::none(), 0.0), 0.0);
  // psi(1) = 1.5 - 1/2 = 1
  EXPECT_NEAR(laplace_exponent(m, DriftShift::none(), 1.0), 1.0, 1e-15);
  DriftShift s{0.3, 1};
  EXPECT_NEAR(laplace_exponent(m, s, 1.0), 0.7, 1e-15);
  EXPECT_THROW(laplace_exponent(m, DriftShift::none(), -0.5), Error);
}

TEST(LaplaceExponent, ConvexOnRandomPairs) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> lam(0.0, 10.0), tt(0.0, 1.0);
  for (const LevyModel& m : {cl_a(), bm_a(), cl_hyp(), jd_a()}) {
    for (int i = 0; i < 200; ++i) {
      double l1 = lam(gen), l2 = lam(gen), t = tt(gen);
      double lhs = m.psi(t * l1 + (1 - t) * l2);
      double rhs = t * m.psi(l1) + (1 - t) * m.psi(l2);
      EXPECT_LE(lhs, rhs + 1e-12);
    }
  }
}

TEST(Mean, ClosedForms) {
  EXPECT_NEAR(cl_a().mean(), 0.5, 1e-15);
  EXPECT_NEAR(bm_a().mean(), 1.0, 1e-15);
  LevyModel flat;  // zero-drift Brownian motion
  flat.drift = 0.0;
  flat.sigma = 1.0;
  EXPECT_DOUBLE_EQ(flat.mean(), 0.0);
  EXPECT_NEAR(cl_hyp().mean(), 1.3, 1e-15);
}

TEST(RightInverse, HandValues) {
  EXPECT_DOUBLE_EQ(right_inverse(cl_a(), DriftShift::none(), 0.0), 0.0);
  // 1.5 lam^2 + 0.25 lam - 0.25 = 0 has positive root 1/3
  EXPECT_NEAR(right_inverse(cl_a(), DriftShift::none(), 0.25), 1.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(right_inverse(bm_a(), DriftShift::none(), 0.0), 0.0);
}

TEST(RightInverse, NegativeMeanSolvesAtZero) {
  LevyModel m = cl_a();
  m.drift = 0.9;  // mean -0.1
  double phi0 = right_inverse(m, DriftShift::none(), 0.0);
  EXPECT_GT(phi0, 0.0);
  EXPECT_NEAR(m.psi(phi0), 0.0, 1e-10);
}

TEST(RightInverse, InverseIdentityAcrossModelsAndShifts) {
  for (const LevyModel& m : {cl_a(), bm_a(), cl_hyp(), jd_a()}) {
    for (double cd : {0.0, 0.3}) {
      if (m.bounded_variation() && cd >= m.drift) continue;
      DriftShift s{cd, cd > 0.0 ? 1 : 0};
      for (double q : {0.0, 0.1, 1.0, 10.0}) {
        double phi = right_inverse(m, s, q);
        EXPECT_NEAR(m.psi(phi, cd), q, 1e-10) << m.name << " q=" << q << " cd=" << cd;
      }
    }
  }
}

TEST(RightInverse, StrictlyMonotoneInDiscountAndShift) {
  for (const LevyModel& m : {cl_a(), bm_a(), cl_hyp()}) {
    double prev = right_inverse(m, DriftShift::none(), 0.05);
    for (double q : {0.1, 0.5, 1.0, 3.0}) {
      double cur = right_inverse(m, DriftShift::none(), q);
      EXPECT_GT(cur, prev);
      prev = cur;
    }
    DriftShift s1{0.1, 1}, s2{0.4, 2};
    double a = right_inverse(m, s1, 1.0);
    double b = right_inverse(m, s2, 1.0);
    EXPECT_GT(b, a);
  }
}

TEST(Validate, StepCapAgainstDrift) {
  auto ok = validate(cl_a(), RateProfile::step({1.0, 2.0}, {0.1, 0.2}));
  EXPECT_TRUE(ok.all_pass);

  auto bad = validate(cl_a(), RateProfile::step({1.0, 2.0}, {1.0, 0.6}));
  EXPECT_FALSE(bad.all_pass);

  // no drain cap for unbounded variation
  auto ubv = validate(bm_a(), RateProfile::step({1.0, 2.0}, {1.0, 0.6}));
  EXPECT_TRUE(ubv.all_pass);
}

TEST(Validate, SmoothProfiles) {
  EXPECT_TRUE(validate(cl_a(), RateProfile::smooth_saturating(0.3, 1.0)).all_pass);
  EXPECT_TRUE(validate(cl_a(), RateProfile::smooth_linear_clamp(0.5, 0.4, 0.1)).all_pass);
  EXPECT_FALSE(validate(cl_a(), RateProfile::smooth_saturating(2.0, 1.0)).all_pass);
}

TEST(RateProfile, StrictStepConvention) {
  RateProfile p = RateProfile::step({1.0, 2.0}, {0.1, 0.2});
  EXPECT_DOUBLE_EQ(p.value(1.0), 0.0);        // indicator is strict
  EXPECT_DOUBLE_EQ(p.value_right(1.0), 0.1);
  EXPECT_DOUBLE_EQ(p.value(1.5), 0.1);
  EXPECT_DOUBLE_EQ(p.value(2.0), 0.1);
  EXPECT_DOUBLE_EQ(p.value_right(2.0), 0.3);
  EXPECT_DOUBLE_EQ(p.value(2.5), 0.3);
  EXPECT_DOUBLE_EQ(p.value(-1.0), 0.0);
  EXPECT_DOUBLE_EQ(p.sup_value(), 0.3);
}

TEST(RateProfile, RejectsNonMonotoneShapes) {
  try {
    RateProfile::step({1.0, 2.0}, {0.1, -0.2});
    FAIL() << "negative increment accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonMonotoneProfile);
  }
  EXPECT_THROW(RateProfile::step({2.0, 1.0}, {0.1, 0.2}), Error);
  EXPECT_THROW(RateProfile::step({-1.0, 1.0}, {0.1, 0.2}), Error);
  EXPECT_THROW(RateProfile::smooth_saturating(0.0, 1.0), Error);
}

TEST(RateProfile, LinearClampBlendIsC1) {
  RateProfile p = RateProfile::smooth_linear_clamp(0.5, 0.4, 0.1);
  double xk = 0.8;
  // continuity and derivative continuity across the blend edges
  for (double x : {xk - 0.1, xk + 0.1}) {
    double eps = 1e-6;
    double num = (p.value(x + eps) - p.value(x - eps)) / (2 * eps);
    EXPECT_NEAR(num, p.deriv(x), 1e-5);
    EXPECT_NEAR(p.value(x + 1e-9), p.value(x - 1e-9), 1e-8);
  }
  EXPECT_DOUBLE_EQ(p.value(2.0), 0.4);
  EXPECT_DOUBLE_EQ(p.deriv(2.0), 0.0);
  EXPECT_NEAR(p.value(0.3), 0.15, 1e-15);
}
