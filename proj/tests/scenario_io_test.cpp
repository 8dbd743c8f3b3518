#include <cmath>
#include <limits>
#include <string>

#include <gtest/gtest.h>

#include "ccplan/records.hpp"
#include "ccplan/scenario_io.hpp"
#include "support.hpp"

using namespace ccplan;

namespace {

void expect_same(const Scenario& a, const Scenario& b) {
  EXPECT_EQ(a.name, b.name);
  EXPECT_EQ(a.system.A, b.system.A);
  EXPECT_EQ(a.system.B, b.system.B);
  EXPECT_EQ(a.system.dt, b.system.dt);
  EXPECT_EQ(a.cwh.has_value(), b.cwh.has_value());
  EXPECT_EQ(a.horizon, b.horizon);
  ASSERT_EQ(a.vehicles.size(), b.vehicles.size());
  for (std::size_t v = 0; v < a.vehicles.size(); ++v) {
    EXPECT_EQ(a.vehicles[v].x0, b.vehicles[v].x0);
    EXPECT_EQ(a.vehicles[v].target.P, b.vehicles[v].target.P);
    EXPECT_EQ(a.vehicles[v].target.p, b.vehicles[v].target.p);
  }
  EXPECT_EQ(a.u_lo, b.u_lo);
  EXPECT_EQ(a.u_hi, b.u_hi);
  EXPECT_EQ(a.S, b.S);
  EXPECT_EQ(a.r, b.r);
  EXPECT_EQ(a.alpha_terminal, b.alpha_terminal);
  EXPECT_EQ(a.alpha_avoid, b.alpha_avoid);
  EXPECT_EQ(a.alpha_obstacle, b.alpha_obstacle);
  EXPECT_EQ(a.disturbance.kind, b.disturbance.kind);
  EXPECT_EQ(a.disturbance.sigma, b.disturbance.sigma);
  EXPECT_EQ(a.disturbance.gamma, b.disturbance.gamma);
  ASSERT_EQ(a.obstacles.size(), b.obstacles.size());
  for (std::size_t o = 0; o < a.obstacles.size(); ++o) {
    EXPECT_EQ(a.obstacles[o].center, b.obstacles[o].center);
    EXPECT_EQ(a.obstacles[o].radius, b.obstacles[o].radius);
  }
}

const char* kMatrixScenario = R"(
[system]
name = slanted
model = matrix
dt = 0.5
horizon = 3
A = 1 0.1; 0 1
B = 0.005; 0.1

[inputs]
lower = -1
upper = 1

[disturbance]
type = gaussian
sigma = 0.01 0.002; 0.002 0.02

[constraints]
separation = 0.5
alpha_terminal = 0.05
alpha_avoid = 0.2
alpha_obstacle = 0.15
position_matrix = 1 0

[vehicle]
x0 = 0 0
face = 1 0.5 2     # slanted face
face = -1 0 0.25

[vehicle]
x0 = 3 0
target_lower = 1 -1
target_upper = 2 1

[obstacle]
center = 1.5
radius = 0.25
)";

ScenarioParseError parse_error(const std::string& text) {
  try {
    parse_scenario(text, "case.ini");
  } catch (const ScenarioParseError& e) {
    return e;
  }
  ADD_FAILURE() << "no parse error for:\n" << text;
  return ScenarioParseError("", -1, "", "");
}

}  // namespace

TEST(ScenarioIo, BundledRoundTrip) {
  for (const char* name : {"cwh_gaussian_6d", "cwh_cauchy_4d"}) {
    const auto a = load_scenario(test::scenario_path(name));
    const auto b = parse_scenario(serialize_scenario(a));
    expect_same(a, b);
    expect_same(b, parse_scenario(serialize_scenario(b)));
  }
}

TEST(ScenarioIo, BundledContents) {
  const auto g = load_scenario(test::scenario_path("cwh_gaussian_6d"));
  EXPECT_EQ(g.vehicles.size(), 3u);
  EXPECT_EQ(g.horizon, 8);
  EXPECT_EQ(g.system.n(), 6);
  EXPECT_EQ(g.r, 15.0);
  EXPECT_EQ(g.alpha_terminal, 0.1);
  EXPECT_EQ(g.alpha_avoid, 0.1);
  EXPECT_EQ(g.u_hi, VectorXd::Constant(3, 5.0));
  EXPECT_EQ(g.vehicles[0].target.faces(), 12);
  const auto c = load_scenario(test::scenario_path("cwh_cauchy_4d"));
  EXPECT_EQ(c.system.n(), 4);
  EXPECT_EQ(c.S.rows(), 2);
  EXPECT_EQ(c.disturbance.kind, DisturbanceKind::kCauchy);
}

TEST(ScenarioIo, MatrixModelFacesAndObstacles) {
  const auto s = parse_scenario(kMatrixScenario);
  EXPECT_FALSE(s.cwh);
  EXPECT_EQ(s.system.A(0, 1), 0.1);
  EXPECT_EQ(s.system.B(0, 0), 0.005);
  EXPECT_EQ(s.disturbance.sigma(1, 0), 0.002);
  EXPECT_EQ(s.vehicles[0].target.faces(), 2);
  EXPECT_EQ(s.vehicles[0].target.P(0, 1), 0.5);
  EXPECT_EQ(s.vehicles[0].target.p(0), 2.0);
  EXPECT_EQ(s.vehicles[1].target.faces(), 4);
  EXPECT_EQ(s.alpha_obstacle, 0.15);
  ASSERT_EQ(s.obstacles.size(), 1u);
  EXPECT_EQ(s.obstacles[0].radius, 0.25);
  expect_same(s, parse_scenario(serialize_scenario(s)));
}

TEST(ScenarioIo, ErrorsCarryLineAndField) {
  std::string text = kMatrixScenario;
  text.replace(text.find("horizon = 3"), 11, "horizon = x");
  auto e = parse_error(text);
  EXPECT_EQ(e.line(), 6);
  EXPECT_NE(e.field().find("horizon"), std::string::npos);
  EXPECT_EQ(e.source(), "case.ini");

  e = parse_error("[system]\nname = a\nbogus line\n");
  EXPECT_EQ(e.line(), 3);

  text = kMatrixScenario;
  text.replace(text.find("radius = 0.25"), 13, "radius = -1");
  e = parse_error(text);
  EXPECT_NE(std::string(e.what()).find("radius"), std::string::npos);

  e = parse_error(std::string(kMatrixScenario) + "\n[weather]\nwind = 3\n");
  EXPECT_NE(e.field().find("weather"), std::string::npos);

  text = kMatrixScenario;
  text.replace(text.find("[inputs]"), 8, "[input");
  e = parse_error(text);
  EXPECT_GT(e.line(), 0);
}

TEST(ScenarioIo, MissingFileIsNotParseError) {
  EXPECT_THROW(load_scenario("/nonexistent/scenario.ini"), std::runtime_error);
  try {
    load_scenario("/nonexistent/scenario.ini");
  } catch (const ScenarioParseError&) {
    FAIL() << "I/O failure reported as a parse error";
  } catch (const std::runtime_error&) {
  }
}

TEST(Records, PwaRoundTripWithInfiniteBudget) {
  PwaQuantile pwa;
  pwa.segments = {{1.0, 0.0}, {3.0, -1.0}};
  pwa.p_lo = 0.5;
  pwa.p_hi = 0.99;
  pwa.xi = std::numeric_limits<double>::infinity();
  pwa.certified_error = 0.25;
  pwa.dist_name = "cauchy";
  const auto j = to_json(pwa);
  EXPECT_EQ(j.at("xi"), "inf");
  const auto back = pwa_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.dist_name, "cauchy");
  EXPECT_TRUE(std::isinf(back.xi));
  ASSERT_EQ(back.segments.size(), 2u);
  EXPECT_EQ(back.segments[1].intercept, -1.0);
  EXPECT_EQ(back.p_hi, 0.99);
  EXPECT_THROW(pwa_from_json(nlohmann::json{{"format", "other"}}), std::invalid_argument);
}

TEST(Records, SolutionRoundTrip) {
  const auto scn = test::integrator_scenario({{0, 0}, {5, 0}}, {{0, 0}, {5, 0}}, 1.0, 2, 0.1);
  const auto cat = catalog(scn);
  Solution sol;
  sol.inputs = {VectorXd::LinSpaced(4, 0.1, 0.4), VectorXd::LinSpaced(4, -0.1, -0.4)};
  sol.U.resize(8);
  sol.U << sol.inputs[0], sol.inputs[1];
  const auto m = static_cast<Eigen::Index>(cat.size());
  sol.risk = VectorXd::Constant(m, 0.01);
  sol.s = VectorXd::Constant(m, 1.5);
  sol.t = VectorXd::Zero(m);
  sol.cost = sol.U.squaredNorm();
  sol.iterations = 3;
  sol.converged = true;
  sol.trace.push_back({1, 1.0, 0.3, 0.0, 0.3, std::numeric_limits<double>::quiet_NaN()});
  const auto back = solution_from_json(nlohmann::json::parse(to_json(sol, cat, "x").dump()));
  EXPECT_EQ(back.U, sol.U);
  ASSERT_EQ(back.inputs.size(), 2u);
  EXPECT_EQ(back.inputs[1], sol.inputs[1]);
  EXPECT_EQ(back.risk, sol.risk);
  EXPECT_EQ(back.s, sol.s);
  EXPECT_EQ(back.cost, sol.cost);
  EXPECT_EQ(back.iterations, 3);
  EXPECT_TRUE(back.converged);
}
