#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccplan/qp.hpp"
#include "ccplan/quantile.hpp"
#include "ccplan/reformulate.hpp"

namespace ccplan {

/// Piecewise-affine quantile per distribution name.
using PwaMap = std::map<std::string, PwaQuantile>;

struct PwaBuildOptions {
  double h = 5e-6;
  double xi = 0.1;
  int n_d = 3;
  double p_max = 1.0 - 1e-4;
  /// Fill the table from the analytic quantile where one exists.
  bool analytic = false;
};

/// One envelope per distribution used by the catalog, covering
/// [max(p0, 1 - alpha), p_max] where alpha is the largest budget of any group
/// the distribution serves.
PwaMap build_pwa_map(const Scenario& scn, const std::vector<CompiledConstraint>& cat,
                     const PwaBuildOptions& options = {});

/// Offsets of the stacked decision vector [U; risk; s; t].
struct DecisionLayout {
  Eigen::Index u_size = 0;
  Eigen::Index risk_offset = 0;
  Eigen::Index risk_size = 0;
  Eigen::Index s_offset = 0;
  Eigen::Index t_offset = 0;
  Eigen::Index t_size = 0;
  Eigen::Index total = 0;
  std::vector<int> risk_index;  // per constraint; -1 for deterministic ones
  std::vector<int> t_index;     // per constraint; -1 for convex ones

  static DecisionLayout build(Eigen::Index u_size, const std::vector<CompiledConstraint>& cat);
};

struct SolverOptions {
  int max_iterations = 100;
  double tolerance = 1e-8;
  double tau0 = 1.0;
  double tau_growth = 4.0;
  double tau_max = 1e4;
  double risk_floor = 1e-6;
};

struct TraceEntry {
  int iteration = 0;
  double tau = 0.0;
  double cost = 0.0;        // sum_i U_i'U_i
  double slack_sum = 0.0;   // sum t
  double penalized = 0.0;   // cost + tau * slack_sum
  /// The previous iterate's penalized objective at this iteration's tau; NaN
  /// on the first iteration.
  double previous_penalized = 0.0;
};

struct Solution {
  VectorXd U;                    // all vehicles stacked
  std::vector<VectorXd> inputs;  // per vehicle, N*m each
  VectorXd risk;                 // per constraint (0 for deterministic)
  VectorXd s;                    // per constraint (0 for deterministic)
  VectorXd t;                    // per constraint (0 for convex)
  double cost = 0.0;
  double relaxation_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<TraceEntry> trace;

  double slack_sum() const { return t.sum(); }
};

class SolveError : public std::runtime_error {
 public:
  enum class Stage { kRelaxation, kIteration };
  SolveError(Stage stage, QpStatus status, int iteration, const std::string& what)
      : std::runtime_error(what), stage(stage), status(status), iteration(iteration) {}
  Stage stage;
  QpStatus status;
  int iteration;
};

/// Convex subproblem around U_ref: reverse-convex norms are linearized at
/// U_ref and relaxed by slacks t penalized with weight tau.
QpProblem build_iterate_qp(const Scenario& scn, const std::vector<CompiledConstraint>& cat,
                           const PwaMap& pwa, const DecisionLayout& layout,
                           const VectorXd& U_ref, double tau,
                           const SolverOptions& options = {});

/// Optimal U of the program with every reverse-convex constraint dropped.
/// Throws SolveError (stage relaxation) if that program is infeasible.
VectorXd initialize(const Scenario& scn, const std::vector<CompiledConstraint>& cat,
                    const PwaMap& pwa, const QpBackend& backend,
                    const SolverOptions& options = {}, double* relaxation_cost = nullptr);

Solution convex_concave_solve(const Scenario& scn, const std::vector<CompiledConstraint>& cat,
                              const PwaMap& pwa, const QpBackend& backend,
                              const SolverOptions& options = {});

struct ConstraintCheck {
  std::string label;
  double risk = 0.0;
  double tightening = 0.0;  // g * quantile(1 - risk)
  double violation = 0.0;   // > 0 means violated
};

struct CertificationReport {
  bool passed = false;
  double tolerance = 1e-6;
  double max_violation = 0.0;
  double terminal_risk = 0.0;
  double avoidance_risk = 0.0;
  double obstacle_risk = 0.0;
  std::vector<ConstraintCheck> checks;
  std::vector<std::string> issues;
};

/// Re-evaluates every constraint with the exact norm and the envelope's
/// value at 1 - risk, plus budgets, risk signs and input bounds.
CertificationReport certify(const Scenario& scn, const Solution& solution,
                            const std::vector<CompiledConstraint>& cat, const PwaMap& pwa,
                            double tolerance = 1e-6);

}  // namespace ccplan
