#include "latticectl/counterexamples.hpp"
#include "latticectl/lie.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace latticectl;

namespace {

State on_periodic_plane(std::mt19937_64& rng, double b, double scale = 0.4) {
  std::uniform_real_distribution<double> u(-scale, scale);
  State x = State::zero(3);
  x.q << u(rng), u(rng), 0.0;
  x.q[2] = x.q[1] + 2.0 * b;
  x.p << u(rng), u(rng), 0.0;
  x.p[2] = x.p[1];
  return x;
}

State on_open_plane(std::mt19937_64& rng, double b, double scale = 0.4) {
  std::uniform_real_distribution<double> u(-scale, scale);
  State x = State::zero(3);
  x.q << u(rng), u(rng), 0.0;
  x.q[2] = x.q[0] - 2.0 * b;
  x.p << u(rng), u(rng), 0.0;
  x.p[2] = x.p[0];
  return x;
}

}  // namespace

TEST(Plane, ResidualAndIndependence) {
  const Plane plane({Plane::q_difference(3, 2, 1, 0.5), Plane::p_difference(3, 2, 1, 0.0)}, "test");
  State x = State::zero(3);
  x.q << 0.0, 1.0, 1.5;
  EXPECT_EQ(plane.residual(x), 0.0);
  x.p[2] = 0.25;
  EXPECT_EQ(plane.residual(x), 0.25);
  EXPECT_THROW(Plane({Plane::q_difference(3, 2, 1, 0.0), Plane::q_difference(3, 2, 1, 1.0)}, "dup"), ContractError);
  State y = State::zero(3);
  y.p << 1.0, -0.5, -0.5;
  EXPECT_EQ(Plane::zero_momentum(3).residual(y), 0.0);
}

TEST(OddForce, Validation) {
  EXPECT_NO_THROW((OddForce{{0, 1, 0, 2}}.require_odd()));
  EXPECT_THROW((OddForce{{0, 0, 1}}.require_odd()), ContractError);
  EXPECT_THROW((OddForce{{0.1, 1}}.require_odd()), ContractError);
  EXPECT_EQ((OddForce{{0, 1, 0, 2}}(2.0)), 2.0 + 16.0);
}

TEST(PeriodicTrimer, CubicGivesQuartic) {
  const auto ce = build_periodic_degenerate_trimer({{0, 0, 0, 1}}, 0.0);
  for (double t : {-1.5, 0.3, 2.0}) EXPECT_NEAR(ce.system.potential().value(t), std::pow(t, 4) / 4.0, 1e-12);
  EXPECT_TRUE(ce.system.periodic());
  EXPECT_EQ(ce.system.control_sites(), std::vector<int>{1});
  State x = State::zero(3);
  x.q << 0.3, -0.2, -0.2;
  x.p << 0.1, 0.4, 0.4;
  EXPECT_EQ(ce.plane.residual(x), 0.0);
}

TEST(PeriodicTrimer, LinearGivesHarmonic) {
  const auto ce = build_periodic_degenerate_trimer({{0, 1}}, 0.0);
  for (double t : {-1.5, 0.3, 2.0}) EXPECT_NEAR(ce.system.potential().value(t), t * t / 2.0, 1e-12);
}

TEST(PeriodicTrimer, Preconditions) {
  EXPECT_THROW(build_periodic_degenerate_trimer({{0, 0, 1}}, 0.0), ContractError);
  EXPECT_THROW(build_periodic_degenerate_trimer({{0, 1}}, 0.2), ContractError);  // F(-0.6) != 0
  // F(t) = t^3 - t vanishes at -3b for b = 1/3
  EXPECT_NO_THROW(build_periodic_degenerate_trimer({{0, -1, 0, 1}}, 1.0 / 3.0));
}

TEST(OpenTrimer, Examples) {
  const auto h = build_nonperiodic_trimer({{0, 1}}, 0.0);
  EXPECT_EQ(h.system.topology(), Topology::open);
  EXPECT_EQ(h.system.control_sites(), std::vector<int>{2});
  const auto c = build_nonperiodic_trimer({{0, 0, 0, 1}}, 0.5);
  EXPECT_EQ(c.plane.constraints[0].offset, -1.0);
  EXPECT_THROW(build_nonperiodic_trimer({{0, 0, 1}}, 0.0), ContractError);
}

TEST(InvariantPlane, QuarticPeriodicStepSignal) {
  const auto ce = build_periodic_degenerate_trimer({{0, 0, 0, 1}}, 0.0);
  State x = State::zero(3);
  x.q << 0.5, -0.2, -0.2;
  x.p << 0.1, 0.3, 0.3;
  const auto u = ControlSignal::single({{2.0, 1.0}, {3.0, -1.5}, {5.0, 0.5}});
  const auto r = invariant_plane_residual(ce.system, ce.plane, x, u, 10.0);
  EXPECT_LT(r.residual, 1e-7);
  EXPECT_TRUE(r.invariant());
}

TEST(InvariantPlane, HarmonicOpenRandomControl) {
  const auto ce = build_nonperiodic_trimer({{0, 1}}, 0.0);
  std::mt19937_64 rng(21);
  const auto r = invariant_plane_residual(ce.system, ce.plane, on_open_plane(rng, 0.0), random_control(rng, 10.0, 6, 2.0), 10.0);
  EXPECT_LT(r.residual, 1e-7);
}

TEST(InvariantPlane, FreeParticles) {
  const auto ce = build_nonperiodic_trimer({{0}}, 0.7);
  std::mt19937_64 rng(22);
  const auto r = invariant_plane_residual(ce.system, ce.plane, on_open_plane(rng, 0.7), random_control(rng, 5.0, 4, 1.0), 5.0);
  EXPECT_LT(r.residual, 1e-12);
}

TEST(InvariantPlane, TodaLeavesThePlane) {
  const auto ce = build_periodic_degenerate_trimer({{0, 0, 0, 1}}, 0.0);
  const LatticeSystem toda(ce.system.config(), Potential::toda());
  State x = State::zero(3);
  x.q << 0.5, 0.0, 0.0;
  const auto r = invariant_plane_residual(toda, ce.plane, x, ControlSignal::constant(0.0, 1.0), 1.0);
  EXPECT_GT(r.residual, 1e-3);
  // initial rate of p3 - p2 is 2 phi(0) - phi(a) - phi(-a) = 4 - 4 cosh(1)
  const auto v = drift(x, toda);
  EXPECT_NEAR(v[5] - v[4], 4.0 - 4.0 * std::cosh(1.0), 1e-12);
}

TEST(InvariantPlane, OffPlaneStartRejected) {
  const auto ce = build_periodic_degenerate_trimer({{0, 1}}, 0.0);
  State x = State::zero(3);
  x.q[2] = 0.1;
  EXPECT_THROW(invariant_plane_residual(ce.system, ce.plane, x, ControlSignal::constant(0, 1), 1.0), ContractError);
}

TEST(InvariantPlane, RandomOddForcesPeriodic) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> c(0.0, 1.0), bdist(-0.3, 0.3);
  for (int draw = 0; draw < 10; ++draw) {
    const double b = draw % 2 ? bdist(rng) : 0.0;
    const double c3 = c(rng), c5 = 0.2 * c(rng);
    const double s = -3.0 * b;
    const double c1 = b == 0.0 ? c(rng) : -(c3 * s * s * s + c5 * std::pow(s, 5)) / s;
    const auto ce = build_periodic_degenerate_trimer({{0, c1, 0, c3, 0, c5}}, b, c(rng));
    for (int k = 0; k < 10; ++k) {
      const auto r = invariant_plane_residual(ce.system, ce.plane, on_periodic_plane(rng, b), random_control(rng, 10.0, 5, 1.0),
                                              10.0);
      EXPECT_LT(r.residual, r.threshold) << "draw " << draw << " control " << k;
    }
  }
}

TEST(InvariantPlane, RandomOddForcesOpen) {
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> c(0.0, 1.0), bdist(-1.0, 1.0);
  for (int draw = 0; draw < 10; ++draw) {
    const double b = bdist(rng);
    const auto ce = build_nonperiodic_trimer({{0, c(rng), 0, c(rng), 0, 0.2 * c(rng)}}, b);
    for (int k = 0; k < 10; ++k) {
      const auto r = invariant_plane_residual(ce.system, ce.plane, on_open_plane(rng, b), random_control(rng, 10.0, 5, 1.0),
                                              10.0);
      EXPECT_LT(r.residual, r.threshold) << "draw " << draw << " control " << k;
    }
  }
}

TEST(InvariantPlane, QuarticRankBoundedOnPlane) {
  const auto ce = build_periodic_degenerate_trimer({{0, 0, 0, 1}}, 0.0);
  std::mt19937_64 rng(25);
  for (int i = 0; i < 5; ++i) EXPECT_LE(lie_rank(on_periodic_plane(rng, 0.0), ce.system).rank, 4);
}
