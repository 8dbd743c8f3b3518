#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include "ccplan/montecarlo.hpp"
#include "support.hpp"

using namespace ccplan;

namespace {

// Two vehicles on the x axis, 2 m apart, moving in parallel; the terminal
// boxes are centered on the nominal end points.
Scenario parallel_pair(double sigma) {
  auto scn = test::integrator_scenario({{0, 0}, {0, 2}}, {{3, 0}, {3, 2}}, 0.5, 3, sigma);
  scn.r = 1.5;
  return scn;
}

std::vector<VectorXd> forward_inputs() {
  VectorXd u(6);
  u << 1, 0, 1, 0, 1, 0;
  return {u, u};
}

}  // namespace

TEST(MonteCarlo, ZeroDisturbanceIsDeterministicFeasibility) {
  auto scn = parallel_pair(0.0);
  McOptions o;
  o.samples = 1000;
  auto rep = evaluate(scn, forward_inputs(), o);
  EXPECT_EQ(*rep.terminal_satisfaction, 1.0);
  EXPECT_EQ(*rep.avoidance_satisfaction, 1.0);

  rep = evaluate(scn, {VectorXd::Zero(6), VectorXd::Zero(6)}, o);
  EXPECT_EQ(*rep.terminal_satisfaction, 0.0);
  EXPECT_EQ(*rep.avoidance_satisfaction, 1.0);

  scn.r = 2.5;
  rep = evaluate(scn, forward_inputs(), o);
  EXPECT_EQ(*rep.avoidance_satisfaction, 0.0);
}

TEST(MonteCarlo, ZeroDisturbanceTraceIsNominal) {
  const auto scn = parallel_pair(0.0);
  McOptions o;
  o.samples = 64;
  const auto traces = distance_trace(scn, forward_inputs(), o);
  ASSERT_EQ(traces.size(), 1u);
  EXPECT_EQ(traces[0].i, 0);
  EXPECT_EQ(traces[0].j, 1);
  ASSERT_EQ(traces[0].distance.size(), 3u);
  for (double d : traces[0].distance) EXPECT_NEAR(d, 2.0, 1e-12);
}

TEST(MonteCarlo, NominalTrajectories) {
  const auto nom = nominal_trajectories(parallel_pair(0.1), forward_inputs());
  ASSERT_EQ(nom.size(), 2u);
  ASSERT_EQ(nom[1].size(), 3u);
  EXPECT_EQ(nom[1][2], Eigen::Vector2d(3.0, 2.0));
}

TEST(MonteCarlo, ProbabilitiesInUnitIntervalAndSeedsAgree) {
  const auto scn = parallel_pair(0.3);
  McOptions a;
  a.seed = 1;
  McOptions b;
  b.seed = 2;
  const auto ra = evaluate(scn, forward_inputs(), a);
  const auto rb = evaluate(scn, forward_inputs(), b);
  EXPECT_EQ(ra.samples, 100000);
  for (const auto* r : {&ra, &rb}) {
    EXPECT_GT(*r->terminal_satisfaction, 0.0);
    EXPECT_LT(*r->terminal_satisfaction, 1.0);
    EXPECT_GT(*r->avoidance_satisfaction, 0.0);
    EXPECT_LT(*r->avoidance_satisfaction, 1.0);
  }
  // Three standard errors of a difference of two independent estimates.
  const auto band = [](double p) { return 3.0 * std::sqrt(2.0 * p * (1.0 - p) / 1e5); };
  EXPECT_LE(std::abs(*ra.terminal_satisfaction - *rb.terminal_satisfaction),
            band(*ra.terminal_satisfaction));
  EXPECT_LE(std::abs(*ra.avoidance_satisfaction - *rb.avoidance_satisfaction),
            band(*ra.avoidance_satisfaction));
  EXPECT_NE(*ra.terminal_satisfaction, *rb.terminal_satisfaction);
}

TEST(MonteCarlo, SameSeedIsReproducibleAcrossThreadCounts) {
  const auto scn = parallel_pair(0.3);
  McOptions o;
  o.samples = 20000;
  o.seed = 99;
  o.threads = 1;
  const auto one = evaluate(scn, forward_inputs(), o);
  o.threads = 4;
  const auto four = evaluate(scn, forward_inputs(), o);
  const auto again = evaluate(scn, forward_inputs(), o);
  EXPECT_EQ(*one.terminal_satisfaction, *four.terminal_satisfaction);
  EXPECT_EQ(*one.avoidance_satisfaction, *four.avoidance_satisfaction);
  EXPECT_EQ(one.traces[0].distance, four.traces[0].distance);
  EXPECT_EQ(*again.terminal_satisfaction, *four.terminal_satisfaction);
}

TEST(MonteCarlo, LargerSeparationNeverHelps) {
  auto scn = parallel_pair(0.3);
  McOptions o;
  o.samples = 20000;
  double prev = 1.0;
  for (double r : {0.5, 1.0, 2.0, 4.0}) {
    scn.r = r;
    const double sat = *evaluate(scn, forward_inputs(), o).avoidance_satisfaction;
    EXPECT_LE(sat, prev) << "r " << r;
    prev = sat;
  }
}

TEST(MonteCarlo, SingleVehicleHasEmptyTrace) {
  const auto scn = test::integrator_scenario({{0, 0}}, {{0, 0}}, 1.0, 2, 0.1);
  McOptions o;
  o.samples = 100;
  const auto rep = evaluate(scn, {VectorXd::Zero(4)}, o);
  EXPECT_TRUE(rep.traces.empty());
  EXPECT_TRUE(distance_trace(scn, {VectorXd::Zero(4)}, o).empty());
}

TEST(MonteCarlo, TraceStatisticFollowsDisturbance) {
  auto scn = parallel_pair(0.3);
  McOptions o;
  o.samples = 2000;
  EXPECT_EQ(evaluate(scn, forward_inputs(), o).trace_statistic, "mean");
  scn.disturbance.kind = DisturbanceKind::kCauchy;
  scn.disturbance.gamma = VectorXd::Constant(2, 0.3);
  const auto rep = evaluate(scn, forward_inputs(), o);
  EXPECT_EQ(rep.trace_statistic, "median");
  for (double d : rep.traces[0].distance) {
    EXPECT_TRUE(std::isfinite(d));
    EXPECT_GT(d, 0.0);
  }
}

TEST(MonteCarlo, ZeroSamplesGivesEmptyReport) {
  McOptions o;
  o.samples = 0;
  const auto rep = evaluate(parallel_pair(0.3), forward_inputs(), o);
  EXPECT_EQ(rep.samples, 0);
  EXPECT_FALSE(rep.terminal_satisfaction);
  EXPECT_FALSE(rep.avoidance_satisfaction);
  EXPECT_FALSE(rep.obstacle_satisfaction);
}

TEST(MonteCarlo, ObstacleSatisfactionOnlyWithObstacles) {
  auto scn = parallel_pair(0.0);
  McOptions o;
  o.samples = 10;
  EXPECT_FALSE(evaluate(scn, forward_inputs(), o).obstacle_satisfaction);
  scn.obstacles.push_back({Eigen::Vector2d(2.0, 1.0), 0.5});
  EXPECT_EQ(*evaluate(scn, forward_inputs(), o).obstacle_satisfaction, 1.0);
  scn.obstacles.back().radius = 1.2;
  EXPECT_EQ(*evaluate(scn, forward_inputs(), o).obstacle_satisfaction, 0.0);
}

TEST(MonteCarlo, RejectsMismatchedInputs) {
  const auto scn = parallel_pair(0.1);
  EXPECT_THROW(evaluate(scn, {VectorXd::Zero(6)}), std::invalid_argument);
  EXPECT_THROW(evaluate(scn, {VectorXd::Zero(6), VectorXd::Zero(5)}), std::invalid_argument);
  McOptions o;
  o.samples = -1;
  EXPECT_THROW(evaluate(scn, forward_inputs(), o), std::invalid_argument);
}
