#pragma once

#include <string>

#include <Eigen/Dense>

namespace ccplan {

/// minimize 0.5 x'Hx + h'x  subject to  G x <= g,  lb <= x <= ub.
/// Bounds may be +-infinity; empty lb/ub means unbounded.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd h;
  Eigen::MatrixXd G;
  Eigen::VectorXd g;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;

  Eigen::Index size() const { return h.size(); }
  double objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(H * x) + h.dot(x); }
  /// Largest violation of the rows and bounds at x (0 when feasible).
  double max_violation(const Eigen::VectorXd& x) const;
  void validate() const;
};

enum class QpStatus { kOptimal, kInfeasible, kNumericalFailure };

const char* to_string(QpStatus status);

struct QpResult {
  QpStatus status = QpStatus::kNumericalFailure;
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
  bool polished = false;  // active-set refinement accepted
  std::string message;
};

class QpBackend {
 public:
  virtual ~QpBackend() = default;
  virtual QpResult solve(const QpProblem& problem) const = 0;
  virtual std::string name() const = 0;
};

struct InteriorPointOptions {
  int max_iterations = 200;
  double tolerance = 1e-10;
  /// Re-solve the KKT system on the detected active set once the interior
  /// point iteration has converged.
  bool polish = true;
};

/// Dense primal-dual interior point (Mehrotra predictor-corrector) with an
/// active-set polish step.
class InteriorPointQp final : public QpBackend {
 public:
  explicit InteriorPointQp(InteriorPointOptions options = {}) : options_(options) {}
  QpResult solve(const QpProblem& problem) const override;
  std::string name() const override { return "interior_point"; }

 private:
  InteriorPointOptions options_;
};

}  // namespace ccplan
