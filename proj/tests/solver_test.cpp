#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include "ccplan/scenario_io.hpp"
#include "ccplan/solver.hpp"
#include "support.hpp"

using namespace ccplan;

namespace {

struct Solved {
  Scenario scn;
  std::vector<CompiledConstraint> cat;
  PwaMap pwa;
  Solution sol;
};

Solved solve(Scenario scn, const SolverOptions& options = {}) {
  Solved r{std::move(scn), {}, {}, {}};
  r.cat = catalog(r.scn);
  r.pwa = build_pwa_map(r.scn, r.cat);
  r.sol = convex_concave_solve(r.scn, r.cat, r.pwa, InteriorPointQp(), options);
  return r;
}

Scenario one_dimensional(double sigma) {
  Scenario scn;
  scn.system.A = MatrixXd::Identity(1, 1);
  scn.system.B = MatrixXd::Identity(1, 1);
  scn.horizon = 1;
  scn.vehicles.push_back({VectorXd::Zero(1), Polytope::box(VectorXd::Constant(1, 1.0),
                                                           VectorXd::Constant(1, 3.0))});
  scn.u_lo = VectorXd::Constant(1, -10.0);
  scn.u_hi = VectorXd::Constant(1, 10.0);
  scn.S = MatrixXd::Identity(1, 1);
  scn.r = 1.0;
  scn.disturbance.sigma = MatrixXd::Constant(1, 1, sigma * sigma);
  return scn;
}

}  // namespace

TEST(Layout, PartitionsDecisionVector) {
  const auto scn = test::integrator_scenario({{0, 0}, {5, 0}}, {{0, 0}, {5, 0}}, 1.0, 3, 0.01);
  const auto cat = catalog(scn);
  const auto layout = DecisionLayout::build(scn.decision_size(), cat);
  EXPECT_EQ(layout.u_size, 12);
  EXPECT_EQ(layout.risk_offset, layout.u_size);
  EXPECT_EQ(layout.s_offset, layout.risk_offset + layout.risk_size);
  EXPECT_EQ(layout.t_offset, layout.s_offset + layout.risk_size);
  EXPECT_EQ(layout.total, layout.t_offset + layout.t_size);
  EXPECT_EQ(layout.risk_size, static_cast<Eigen::Index>(cat.size()));
  EXPECT_EQ(layout.t_size, 3);
}

TEST(Solver, BudgetBindsOnSingleActiveFace) {
  const double sigma = 0.2;
  const auto r = solve(one_dimensional(sigma));
  ASSERT_TRUE(r.sol.converged);
  const auto& env = r.pwa.at("gaussian");
  const double floor = std::max(SolverOptions{}.risk_floor, 1.0 - env.p_hi);
  // Face 0 (x <= 3) is slack and keeps the minimum risk; face 1 (x >= 1)
  // takes the rest of the budget.
  EXPECT_NEAR(r.sol.risk.sum(), r.scn.alpha_terminal, 1e-9);
  EXPECT_NEAR(r.sol.risk(0), floor, 1e-9);
  const double expect_u = 1.0 + sigma * env.eval(1.0 - (r.scn.alpha_terminal - floor));
  EXPECT_NEAR(r.sol.U(0), expect_u, 1e-7);
  EXPECT_NEAR(r.sol.cost, expect_u * expect_u, 1e-6);
  EXPECT_EQ(r.sol.iterations, 1);
}

TEST(Solver, ConvexProgramNeedsOneSolve) {
  const auto scn = test::integrator_scenario({{0, 0}}, {{4, 1}}, 0.5, 3, 0.05);
  const auto cat = catalog(scn);
  const auto pwa = build_pwa_map(scn, cat);
  double relax = 0.0;
  const VectorXd U0 = initialize(scn, cat, pwa, InteriorPointQp(), {}, &relax);
  const auto sol = convex_concave_solve(scn, cat, pwa, InteriorPointQp());
  ASSERT_TRUE(sol.converged);
  EXPECT_LE((sol.U - U0).norm(), 1e-8);
  EXPECT_NEAR(sol.cost, relax, 1e-9);
  EXPECT_NEAR(sol.relaxation_cost, relax, 1e-12);
}

TEST(Solver, SeparatedStationaryVehicles) {
  const auto r = solve(test::integrator_scenario({{0, 0}, {10, 0}}, {{0, 0}, {10, 0}}, 1.0, 4, 0.01));
  ASSERT_TRUE(r.sol.converged);
  EXPECT_LE(r.sol.iterations, 3);
  EXPECT_LE(r.sol.slack_sum(), 1e-9);
  EXPECT_LE(r.sol.t.cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Solver, ZeroPenaltyLetsSlackAbsorbViolation) {
  const auto scn = test::integrator_scenario({{0, 0}, {0, 0}}, {{0, 0}, {0, 0}}, 1.0, 2, 0.01);
  const auto cat = catalog(scn);
  const auto pwa = build_pwa_map(scn, cat);
  const auto layout = DecisionLayout::build(scn.decision_size(), cat);
  const auto qp = build_iterate_qp(scn, cat, pwa, layout, VectorXd::Zero(layout.u_size), 0.0);
  const auto res = InteriorPointQp().solve(qp);
  ASSERT_EQ(res.status, QpStatus::kOptimal) << res.message;
  const VectorXd t = res.x.segment(layout.t_offset, layout.t_size);
  EXPECT_GT(t.minCoeff(), 0.0);
  EXPECT_GE(t.sum(), 2.0 * scn.r - 1e-9);
}

TEST(Solver, CoincidentStartsUseSlack) {
  auto scn = test::integrator_scenario({{0, 0}, {0, 0}}, {{0, 0}, {0, 0}}, 1.0, 2, 0.01, 0.1);
  SolverOptions opts;
  opts.max_iterations = 15;
  const auto r = solve(scn, opts);
  EXPECT_FALSE(r.sol.converged);
  EXPECT_GT(r.sol.slack_sum(), 0.0);
  EXPECT_EQ(r.sol.iterations, 15);
}

TEST(Solver, ZeroDisturbanceMatchesDeterministicQp) {
  // min |u0|^2 + |u1|^2 with u0 + u1 reaching x >= 1: u = (0.5, 0) per step.
  auto scn = test::integrator_scenario({{0, 0}}, {{1.5, 0}}, 0.5, 2, 0.0);
  const auto r = solve(scn);
  ASSERT_TRUE(r.sol.converged);
  EXPECT_EQ(r.sol.risk.size(), static_cast<Eigen::Index>(r.cat.size()));
  EXPECT_EQ(r.sol.risk.sum(), 0.0);
  Eigen::Vector4d expect(0.5, 0.0, 0.5, 0.0);
  EXPECT_LE((r.sol.U - expect).cwiseAbs().maxCoeff(), 1e-6);
  const auto rep = certify(r.scn, r.sol, r.cat, r.pwa);
  EXPECT_TRUE(rep.passed);
  for (const auto& c : rep.checks) EXPECT_EQ(c.tightening, 0.0);
}

TEST(Solver, UnreachableTargetRejected) {
  const auto scn = test::integrator_scenario({{0, 0}}, {{100, 0}}, 1.0, 3, 0.01, 1.0);
  const auto cat = catalog(scn);
  const auto pwa = build_pwa_map(scn, cat);
  try {
    initialize(scn, cat, pwa, InteriorPointQp());
    FAIL() << "unreachable target accepted";
  } catch (const SolveError& e) {
    EXPECT_EQ(e.stage, SolveError::Stage::kRelaxation);
    EXPECT_EQ(e.status, QpStatus::kInfeasible);
  }
  EXPECT_THROW(convex_concave_solve(scn, cat, pwa, InteriorPointQp()), SolveError);
}

TEST(Solver, RejectsEmptyCatalogAndMissingEnvelope) {
  const auto scn = test::integrator_scenario({{0, 0}}, {{1, 0}}, 1.0, 2, 0.01);
  EXPECT_THROW(convex_concave_solve(scn, {}, {}, InteriorPointQp()), std::invalid_argument);
  EXPECT_THROW(convex_concave_solve(scn, catalog(scn), {}, InteriorPointQp()), std::invalid_argument);
}

class GaussianScenario : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    run_ = new Solved(solve(load_scenario(test::scenario_path("cwh_gaussian_6d"))));
  }
  static void TearDownTestSuite() {
    delete run_;
    run_ = nullptr;
  }
  static Solved* run_;
};

Solved* GaussianScenario::run_ = nullptr;

TEST_F(GaussianScenario, ConvergesAndCertifies) {
  const auto& r = *run_;
  ASSERT_TRUE(r.sol.converged);
  EXPECT_LT(r.sol.slack_sum(), 1e-8);
  const auto rep = certify(r.scn, r.sol, r.cat, r.pwa);
  EXPECT_TRUE(rep.passed);
  EXPECT_LE(rep.max_violation, 1e-6);
  EXPECT_LE(rep.terminal_risk, r.scn.alpha_terminal + 1e-9);
  EXPECT_LE(rep.avoidance_risk, r.scn.alpha_avoid + 1e-9);
  EXPECT_GE(r.sol.risk.minCoeff(), 0.0);
}

TEST_F(GaussianScenario, RelaxationBoundsCost) {
  const auto& r = *run_;
  EXPECT_TRUE(r.sol.U.allFinite());
  EXPECT_LE(r.sol.relaxation_cost, r.sol.cost + 1e-9);
}

TEST_F(GaussianScenario, PenalizedObjectiveDescends) {
  const auto& trace = run_->sol.trace;
  ASSERT_FALSE(trace.empty());
  EXPECT_TRUE(std::isnan(trace.front().previous_penalized));
  for (std::size_t i = 1; i < trace.size(); ++i) {
    EXPECT_LE(trace[i].penalized, trace[i].previous_penalized + 1e-10) << "iteration " << i;
    EXPECT_NEAR(trace[i].penalized, trace[i].cost + trace[i].tau * trace[i].slack_sum, 1e-9);
  }
}

TEST_F(GaussianScenario, TauSchedule) {
  const auto& trace = run_->sol.trace;
  const SolverOptions o;
  double tau = o.tau0;
  for (const auto& e : trace) {
    EXPECT_EQ(e.tau, tau);
    tau = std::min(tau * o.tau_growth, o.tau_max);
  }
}

TEST_F(GaussianScenario, EnvelopeNeverLoosensTightening) {
  const auto& r = *run_;
  for (std::size_t i = 0; i < r.cat.size(); ++i) {
    const auto& c = r.cat[i];
    if (c.deterministic()) continue;
    const auto& env = r.pwa.at(c.dist->name());
    ASSERT_TRUE(env.source);
    const auto& tab = *env.source;
    const double p = 1.0 - r.sol.risk(static_cast<Eigen::Index>(i));
    const auto it = std::upper_bound(tab.p.begin(), tab.p.end(), p);
    ASSERT_NE(it, tab.p.begin());
    const auto idx = static_cast<std::size_t>(it - tab.p.begin()) - 1;
    EXPECT_GE(env.eval(p), tab.q[idx]) << c.label();
    EXPECT_GE(r.sol.s(static_cast<Eigen::Index>(i)), env.eval(p) - 1e-8) << c.label();
  }
}

TEST_F(GaussianScenario, PerturbedRiskFlagged) {
  const auto& r = *run_;
  Solution bad = r.sol;
  bad.risk(0) += r.scn.alpha_terminal;
  const auto rep = certify(r.scn, bad, r.cat, r.pwa);
  EXPECT_FALSE(rep.passed);
  EXPECT_FALSE(rep.issues.empty());
  Solution neg = r.sol;
  neg.risk(1) = -1e-3;
  EXPECT_FALSE(certify(r.scn, neg, r.cat, r.pwa).passed);
  Solution moved = r.sol;
  moved.U(0) += 5.0;
  moved.inputs[0](0) += 5.0;
  EXPECT_FALSE(certify(r.scn, moved, r.cat, r.pwa).passed);
}

TEST_F(GaussianScenario, Deterministic) {
  const auto again = solve(run_->scn);
  EXPECT_EQ(again.sol.U, run_->sol.U);
  EXPECT_EQ(again.sol.risk, run_->sol.risk);
  EXPECT_EQ(again.sol.iterations, run_->sol.iterations);
  EXPECT_EQ(again.sol.cost, run_->sol.cost);
}
