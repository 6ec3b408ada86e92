#include "latticectl/system.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace latticectl;

namespace {

LatticeSystem periodic(int n, Potential pot, std::vector<int> sites = {1}) {
  return LatticeSystem({n, Topology::periodic, std::move(sites)}, std::move(pot));
}

State make(std::initializer_list<double> q, std::initializer_list<double> p) {
  State x = State::zero(static_cast<int>(q.size()));
  int i = 0;
  for (double v : q) x.q[i++] = v;
  i = 0;
  for (double v : p) x.p[i++] = v;
  return x;
}

}  // namespace

TEST(LatticeConfig, Validation) {
  EXPECT_THROW((LatticeConfig{1, Topology::periodic, {1}}.validate()), ContractError);
  EXPECT_THROW((LatticeConfig{3, Topology::periodic, {4}}.validate()), ContractError);
  EXPECT_THROW((LatticeConfig{3, Topology::periodic, {0}}.validate()), ContractError);
  EXPECT_THROW((LatticeConfig{3, Topology::periodic, {1, 1}}.validate()), ContractError);
  EXPECT_NO_THROW((LatticeConfig{3, Topology::open, {2}}.validate()));
  EXPECT_EQ((LatticeConfig{4, Topology::periodic, {1}}.bonds()), 4);
  EXPECT_EQ((LatticeConfig{4, Topology::open, {1}}.bonds()), 3);
}

TEST(Hamiltonian, TodaAtRest) {
  EXPECT_DOUBLE_EQ(hamiltonian(State::zero(3), periodic(3, Potential::toda())), 3.0);
}

TEST(Hamiltonian, QuarticKineticOnly) {
  EXPECT_DOUBLE_EQ(hamiltonian(make({0, 0}, {1, -1}), periodic(2, Potential::quartic())), 1.0);
}

TEST(Hamiltonian, TodaSpreadState) {
  // bonds 1, 1, -2 evaluated in long double
  const long double want = 2.0L * std::exp(2.0L) + std::exp(-4.0L);
  EXPECT_NEAR(hamiltonian(make({1, 0, -1}, {0, 0, 0}), periodic(3, Potential::toda())), static_cast<double>(want), 1e-13);
  EXPECT_NEAR(static_cast<double>(want), 14.796428, 1e-6);
}

TEST(Hamiltonian, OpenChainDropsWrapBond) {
  const LatticeSystem sys({3, Topology::open, {1}}, Potential::toda());
  EXPECT_DOUBLE_EQ(hamiltonian(State::zero(3), sys), 2.0);
}

TEST(Hamiltonian, DimensionMismatch) {
  EXPECT_THROW(hamiltonian(State::zero(4), periodic(3, Potential::toda())), ContractError);
  EXPECT_THROW(drift(State::zero(2), periodic(3, Potential::toda())), ContractError);
}

TEST(Drift, TodaEquilibrium) {
  EXPECT_EQ(drift(State::zero(3), periodic(3, Potential::toda())).norm(), 0.0);
}

TEST(Drift, TodaSpreadState) {
  const auto v = drift(make({1, 0, -1}, {0, 0, 0}), periodic(3, Potential::toda()));
  const double e = 2.0 * std::exp(-4.0) - 2.0 * std::exp(2.0);
  EXPECT_NEAR(v[3], e, 1e-12);
  EXPECT_NEAR(v[4], 0.0, 1e-12);
  EXPECT_NEAR(v[5], -e, 1e-12);
  EXPECT_NEAR(v[3], -14.741481, 1e-6);
  EXPECT_EQ(v.head(3).norm(), 0.0);
}

TEST(Drift, HarmonicSpreadState) {
  const auto v = drift(make({1, 0, -1}, {0.5, 0, 0}), periodic(3, Potential::harmonic()));
  EXPECT_DOUBLE_EQ(v[3], -3.0);
  EXPECT_DOUBLE_EQ(v[4], 0.0);
  EXPECT_DOUBLE_EQ(v[5], 3.0);
  EXPECT_DOUBLE_EQ(v[0], 0.5);
}

TEST(Drift, OpenChainMissingNeighbour) {
  const LatticeSystem sys({3, Topology::open, {1}}, Potential::harmonic());
  const auto v = drift(make({1, 0, -1}, {0, 0, 0}), sys);
  // p1' = -phi(q1 - q2) = -1, p2' = phi(1) - phi(1) = 0, p3' = phi(q2 - q3) = 1
  EXPECT_DOUBLE_EQ(v[3], -1.0);
  EXPECT_DOUBLE_EQ(v[4], 0.0);
  EXPECT_DOUBLE_EQ(v[5], 1.0);
}

TEST(Drift, TwoParticleRingDoublesTheBond) {
  const auto v = drift(make({0.5, 0}, {0, 0}), periodic(2, Potential::harmonic()));
  EXPECT_DOUBLE_EQ(v[2], -1.0);
  EXPECT_DOUBLE_EQ(v[3], 1.0);
}

TEST(Drift, ForcesSumToZero) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto topo : {Topology::periodic, Topology::open}) {
    const LatticeSystem sys({5, topo, {1}}, Potential::toda());
    State x = State::zero(5);
    for (int k = 0; k < 5; ++k) x.q[k] = u(rng);
    EXPECT_NEAR(drift(x, sys).tail(5).sum(), 0.0, 1e-12);
  }
}

TEST(ControlField, Sites) {
  TangentVector want(6);
  want << 0, 0, 0, 1, 0, 0;
  EXPECT_EQ(control_field(1, periodic(3, Potential::toda())), want);
  want << 0, 0, 0, 0, 0, 1;
  EXPECT_EQ(control_field(3, periodic(3, Potential::toda(), {1, 3})), want);
  want << 0, 0, 0, 0, 1, 0;
  EXPECT_EQ(control_field(2, LatticeSystem({3, Topology::open, {2}}, Potential::toda())), want);
  EXPECT_THROW(control_field(2, periodic(3, Potential::toda())), ContractError);
}

TEST(FeedbackDecouple, TodaCoincidentEnds) {
  const auto sys = periodic(3, Potential::toda(), {1, 3});
  const auto r = feedback_decouple(sys, 0.0, 0.0, make({0.2, -0.1, 0.2}, {0, 0, 0}));
  EXPECT_DOUBLE_EQ(r.u, 2.0);
  EXPECT_DOUBLE_EQ(r.v, -2.0);
}

TEST(FeedbackDecouple, HarmonicIdentity) {
  const auto sys = periodic(4, Potential::harmonic(), {1, 4});
  const auto r = feedback_decouple(sys, 0.3, -0.7, make({0.4, 1.0, -2.0, 0.4}, {1, 2, 3, 4}));
  EXPECT_DOUBLE_EQ(r.u, 0.3);
  EXPECT_DOUBLE_EQ(r.v, -0.7);
}

TEST(FeedbackDecouple, ReproducesPeriodicDrift) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int n : {3, 4, 5}) {
    for (const auto& pot : {Potential::toda(), Potential::quartic(), Potential::harmonic()}) {
      const auto ring = periodic(n, pot, {1, n});
      const auto chain = ring.with_topology(Topology::open);
      for (int trial = 0; trial < 20; ++trial) {
        State x = State::zero(n);
        for (int k = 0; k < n; ++k) x.q[k] = u(rng), x.p[k] = u(rng);
        const double a = u(rng), b = u(rng);
        const auto d = feedback_decouple(ring, a, b, x);
        const std::vector<double> uc{a, b}, ud{d.u, d.v};
        const TangentVector diff = controlled_rhs(x, ring, uc) - controlled_rhs(x, chain, ud);
        EXPECT_LT(diff.cwiseAbs().maxCoeff(), 1e-12);
      }
    }
  }
}

TEST(FeedbackDecouple, WrongSites) {
  EXPECT_THROW(feedback_decouple(periodic(3, Potential::toda()), 0, 0, State::zero(3)), ContractError);
  EXPECT_THROW(feedback_decouple(periodic(3, Potential::toda(), {1, 2}), 0, 0, State::zero(3)), ContractError);
  const LatticeSystem open({3, Topology::open, {1, 3}}, Potential::toda());
  EXPECT_THROW(feedback_decouple(open, 0, 0, State::zero(3)), ContractError);
}

TEST(State, FlatRoundTripAndMomentum) {
  const State x = make({1, 2, 3}, {0.5, -1, 0.25});
  EXPECT_EQ(State::from_flat(x.flat()).q, x.q);
  EXPECT_EQ(State::from_flat(x.flat()).p, x.p);
  EXPECT_EQ(x.total_momentum(), 0.5 - 1 + 0.25);
  EXPECT_THROW(State(Vector::Zero(2), Vector::Zero(3)), ContractError);
}
