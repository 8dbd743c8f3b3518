#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ccplan/distributions.hpp"
#include "ccplan/dynamics.hpp"

namespace ccplan {

/// {x : P x <= p}.
struct Polytope {
  MatrixXd P;
  VectorXd p;

  Eigen::Index faces() const { return P.rows(); }
  bool contains(const VectorXd& x, double tol = 0.0) const;
  void validate(Eigen::Index dim) const;

  /// Axis-aligned box lo <= x <= hi; faces ordered +e_0, -e_0, +e_1, ...
  static Polytope box(const VectorXd& lo, const VectorXd& hi);
};

struct Vehicle {
  VectorXd x0;
  Polytope target;
};

enum class DisturbanceKind { kGaussian, kCauchy };

/// Per-step additive disturbance, iid across steps and vehicles. Gaussian
/// uses the covariance `sigma` (n x n); Cauchy uses independent per-state
/// Cauchy scales `gamma` (n).
struct Disturbance {
  DisturbanceKind kind = DisturbanceKind::kGaussian;
  MatrixXd sigma;
  VectorXd gamma;

  bool is_zero() const;
};

/// Fixed circular/spherical keep-out region in the space of S x.
struct StaticObstacle {
  VectorXd center;
  double radius = 0.0;
};

struct Scenario {
  std::string name;
  LtiSystem system;
  std::optional<CwhParams> cwh;  // set when the system was built from CWH parameters
  int horizon = 1;
  std::vector<Vehicle> vehicles;
  VectorXd u_lo;  // per-step input bounds (m)
  VectorXd u_hi;
  MatrixXd S;     // position extraction
  double r = 0.0;
  double alpha_terminal = 0.1;
  double alpha_avoid = 0.1;
  double alpha_obstacle = 0.1;
  Disturbance disturbance;
  std::vector<StaticObstacle> obstacles;

  Eigen::Index inputs_per_vehicle() const { return horizon * system.m(); }
  Eigen::Index decision_size() const {
    return static_cast<Eigen::Index>(vehicles.size()) * inputs_per_vehicle();
  }
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

enum class ConstraintKind { kConvexUpper, kReverseConvexLower };
enum class RiskGroup { kTerminal, kAvoidance, kObstacle };

const char* to_string(ConstraintKind kind);
const char* to_string(RiskGroup group);

/// One chance constraint on the stacked inputs U of all vehicles:
///   convex-upper:          P(f(U) + g eta <= c) >= 1 - risk,  f(U) = a U + b
///   reverse-convex-lower:  P(f(U) - g eta >= c) >= 1 - risk,  f(U) = |M U + v|
/// g = 0 marks a deterministic constraint without a risk variable.
struct CompiledConstraint {
  ConstraintKind kind = ConstraintKind::kConvexUpper;
  Eigen::RowVectorXd a;
  double b = 0.0;
  MatrixXd M;
  VectorXd v;
  double g = 0.0;
  double c = 0.0;
  DistributionPtr dist;
  RiskGroup group = RiskGroup::kTerminal;
  int vehicle = -1;
  int other = -1;  // second vehicle or obstacle index
  int step = 0;
  int face = -1;

  bool deterministic() const { return !(g > 0.0); }
  double f(const VectorXd& U) const;
  std::string label() const;
};

/// Shared instance of a built-in distribution (constructed once per process).
DistributionPtr shared_distribution(const std::string& name);

std::vector<CompiledConstraint> compile_terminal_gaussian(const Scenario& scn,
                                                          const ConcatDynamics& dyn,
                                                          int vehicle);
CompiledConstraint compile_collision_gaussian(const Scenario& scn, const ConcatDynamics& dyn,
                                              int i, int j, int k);
std::vector<CompiledConstraint> compile_terminal_cauchy(const Scenario& scn,
                                                        const ConcatDynamics& dyn,
                                                        int vehicle);
CompiledConstraint compile_collision_cauchy(const Scenario& scn, const ConcatDynamics& dyn,
                                            int i, int j, int k);
CompiledConstraint compile_obstacle(const Scenario& scn, const ConcatDynamics& dyn,
                                    int vehicle, int obstacle, int k);

/// Terminal constraints for every vehicle and face, then avoidance for every
/// unordered pair and step 1..N, then static obstacles.
std::vector<CompiledConstraint> catalog(const Scenario& scn);

}  // namespace ccplan
