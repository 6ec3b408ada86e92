#include "latticectl/potential.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace latticectl;

namespace {

std::vector<Potential> builtins() {
  return {Potential::toda(), Potential::harmonic(), Potential::quartic(),
          Potential::polynomial({0.1, -0.4, -0.5, 0.2, 0.25}, 0.3, 0.05), Potential::from_odd_force({0.5, 1.0}, 0.7, 0.2),
          Potential::shifted_odd({1.0, 0.3}, -0.4)};
}

double central(const Potential& pot, int k, double t) {
  const double h = 1e-5 * (1.0 + std::abs(t));
  return (pot.derivative(k, t + h) - pot.derivative(k, t - h)) / (2.0 * h);
}

}  // namespace

TEST(Potential, TodaClosedForm) {
  const auto p = Potential::toda();
  EXPECT_DOUBLE_EQ(p.value(0.0), 1.0);
  EXPECT_DOUBLE_EQ(p.phi(0.0), 2.0);
  EXPECT_DOUBLE_EQ(p.dphi(0.0), 4.0);
  EXPECT_DOUBLE_EQ(p.ddphi(0.0), 8.0);
  EXPECT_DOUBLE_EQ(p.phi(0.7), 2.0 * std::exp(1.4));
  EXPECT_DOUBLE_EQ(p.ddphi(-1.1), 8.0 * std::exp(-2.2));
}

TEST(Potential, DerivativesMatchFiniteDifferences) {
  for (const auto& pot : builtins()) {
    for (int i = 0; i < 100; ++i) {
      const double t = -5.0 + 10.0 * (i + 0.5) / 100.0;
      for (int k = 1; k <= 3; ++k) {
        const double exact = pot.derivative(k, t), fd = central(pot, k - 1, t);
        EXPECT_LE(std::abs(exact - fd), 1e-6 * std::max(1.0, std::abs(exact))) << pot.name() << " k=" << k << " t=" << t;
      }
    }
  }
}

TEST(Potential, TemplateForceAgreesWithPhi) {
  for (const auto& pot : builtins())
    for (double t : {-2.0, -0.3, 0.0, 0.9, 2.5}) EXPECT_NEAR(pot.force(t), pot.phi(t), 1e-12 * (1 + std::abs(pot.phi(t))));
}

TEST(Potential, LowerBounds) {
  EXPECT_EQ(Potential::toda().lower_bound(), 0.0);
  EXPECT_EQ(Potential::harmonic().lower_bound(), 0.0);
  EXPECT_EQ(Potential::quartic().lower_bound(), 0.0);
  // (t^2 - 1)^2 - 0.5 has minimum -0.5 at t = +-1
  const auto w = Potential::polynomial({0.5, 0.0, -2.0, 0.0, 1.0});
  EXPECT_NEAR(w.lower_bound(), 0.5, 1e-9);
  EXPECT_GE(w.lower_bound(), 0.5);
  EXPECT_FALSE(Potential::shifted_odd({1.0}, 0.0).bounded_below());
}

TEST(Potential, GrowthFlag) {
  EXPECT_TRUE(Potential::toda().grows());
  EXPECT_TRUE(Potential::harmonic().grows());
  EXPECT_TRUE(Potential::quartic().grows());
  EXPECT_FALSE(Potential::polynomial({1.0}).grows());
  EXPECT_FALSE(Potential::polynomial({0.0, 0.0, -1.0}).grows());
}

TEST(Potential, OddForceGivesEvenStiffnessAboutShift) {
  const auto p = Potential::from_odd_force({0.5, 1.0, 0.1}, 0.7, 0.3);
  for (double t : {0.1, 0.8, 2.0}) {
    EXPECT_NEAR(p.dphi(0.7 + t), p.dphi(0.7 - t), 1e-12);
    EXPECT_NEAR(p.phi(0.7 + t) - 0.3, -(p.phi(0.7 - t) - 0.3), 1e-12);
  }
  EXPECT_NEAR(p.phi(0.7), 0.3, 1e-15);
}

TEST(Potential, ShiftedOddGivesOddStiffness) {
  const auto p = Potential::shifted_odd({1.0, 0.3}, -0.4);
  for (double t : {0.2, 1.0, 3.0}) EXPECT_NEAR(p.dphi(-0.4 + t), -p.dphi(-0.4 - t), 1e-12);
}

TEST(Potential, LinearForceDetection) {
  EXPECT_TRUE(Potential::harmonic().linear_force());
  EXPECT_DOUBLE_EQ(Potential::harmonic().stiffness(), 1.0);
  EXPECT_FALSE(Potential::quartic().linear_force());
  EXPECT_FALSE(Potential::toda().linear_force());
}
