#pragma once

// Small scenarios shared by the tests.

#include <string>
#include <vector>

#include "ccplan/reformulate.hpp"

namespace ccplan::test {

inline std::string scenario_path(const std::string& name) {
  return std::string(CCPLAN_SOURCE_DIR) + "/scenarios/" + name + ".ini";
}

/// Planar single integrator x(k+1) = x(k) + u(k) + w(k), S = I.
inline Scenario integrator_scenario(const std::vector<Eigen::Vector2d>& starts,
                                    const std::vector<Eigen::Vector2d>& goals, double half_width,
                                    int horizon, double sigma, double u_max = 5.0) {
  Scenario scn;
  scn.name = "integrator";
  scn.system.A = MatrixXd::Identity(2, 2);
  scn.system.B = MatrixXd::Identity(2, 2);
  scn.system.dt = 1.0;
  scn.horizon = horizon;
  for (std::size_t v = 0; v < starts.size(); ++v) {
    Vehicle veh;
    veh.x0 = starts[v];
    veh.target = Polytope::box(goals[v].array() - half_width, goals[v].array() + half_width);
    scn.vehicles.push_back(veh);
  }
  scn.u_lo = VectorXd::Constant(2, -u_max);
  scn.u_hi = VectorXd::Constant(2, u_max);
  scn.S = MatrixXd::Identity(2, 2);
  scn.r = 1.0;
  scn.disturbance.kind = DisturbanceKind::kGaussian;
  scn.disturbance.sigma = sigma * sigma * MatrixXd::Identity(2, 2);
  return scn;
}

}  // namespace ccplan::test
