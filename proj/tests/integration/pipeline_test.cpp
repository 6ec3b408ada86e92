#include "latticectl/analysis.hpp"
#include "latticectl/steering.hpp"

#include <gtest/gtest.h>

using namespace latticectl;

namespace {

LatticeSystem toda3() { return LatticeSystem({3, Topology::periodic, {1}}, Potential::toda()); }

State start_off_plane() {
  State x = State::zero(3);
  x.q << 0.1, -0.2, 0.05;
  x.p << 1.0, 0.6, 0.4;
  return x;
}

}  // namespace

TEST(Pipeline, AdmissibleSteeringAcrossThePlane) {
  const auto sys = toda3();
  const State start = start_off_plane();
  ASSERT_NEAR(start.total_momentum(), 2.0, 1e-12);
  SteeringPlan known;
  known.mode = PlanMode::admissible;
  known.steps = {ConstantLeg{-2.0, 1.0}, ConjugatedFlow{1, 0.4}, FreeFlow{0.7}, ConstantLeg{-1.0, 1.0}};
  const State goal = plan_endpoint(start, known, sys);
  ASSERT_NEAR(goal.total_momentum(), -1.0, 1e-9);

  PlannerOptions opt;
  opt.mode = PlanMode::admissible;
  const auto plan = plan_steering(start, goal, 5e-2, sys, opt);
  ASSERT_TRUE(plan.reached);
  EXPECT_TRUE(std::holds_alternative<ConstantLeg>(plan.steps.front()));
  EXPECT_TRUE(std::holds_alternative<ConstantLeg>(plan.steps.back()));
  EXPECT_NO_THROW(plan.validate());

  const auto run = execute_plan(start, plan, sys);
  ASSERT_TRUE(run.control.has_value());
  EXPECT_LE(distance(run.final, goal), 5e-2);
  EXPECT_NEAR(run.final.total_momentum() - start.total_momentum(), plan.momentum_budget(), 1e-9);
}

TEST(Pipeline, ExecutedControlConservesEnergyBetweenKicks) {
  const auto sys = toda3();
  State x = start_off_plane();
  x.p.array() -= x.p.mean();
  SteeringPlan plan;
  plan.steps = {FreeFlow{0.5}, GShift{0.3}, FreeFlow{0.5}};
  const auto run = execute_plan(x, plan, sys);
  const double h0 = hamiltonian(x, sys);
  const double h1 = hamiltonian(run.final, sys);
  const double kick = hamiltonian(g_shift(free_flow(x, 0.5, sys), 0.3), sys) - hamiltonian(free_flow(x, 0.5, sys), sys);
  EXPECT_NEAR(h1 - h0, kick, 1e-9);
}
