#pragma once

#include <Eigen/Dense>
#include <vector>

namespace ccplan {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// x(k+1) = A x(k) + B u(k) + w(k).
struct LtiSystem {
  MatrixXd A;
  MatrixXd B;
  double dt = 1.0;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  /// Throws std::invalid_argument on inconsistent shapes.
  void validate() const;
};

/// Closed-form state maps over a horizon:
///   x(k) = A^k x0 + Cu(k) U + Cw(k) W,
/// with U = [u(0); ...; u(N-1)] and W = [w(0); ...; w(N-1)].
class ConcatDynamics {
 public:
  ConcatDynamics(const LtiSystem& sys, int horizon);

  int horizon() const { return horizon_; }
  Eigen::Index n() const { return n_; }
  Eigen::Index m() const { return m_; }
  /// A^k for 0 <= k <= N.
  const MatrixXd& a_pow(int k) const;
  /// [A^{k-1}B ... AB B 0], n x Nm, for 1 <= k <= N.
  const MatrixXd& cu(int k) const;
  /// [A^{k-1} ... A I 0], n x Nn, for 1 <= k <= N.
  const MatrixXd& cw(int k) const;

  VectorXd state(int k, const VectorXd& x0, const VectorXd& U, const VectorXd& W) const;

 private:
  int horizon_;
  Eigen::Index n_;
  Eigen::Index m_;
  std::vector<MatrixXd> a_pow_;
  std::vector<MatrixXd> cu_;
  std::vector<MatrixXd> cw_;
};

ConcatDynamics concat(const LtiSystem& sys, int horizon);

struct CwhParams {
  double mass = 100.0;           // kg
  double mu = 3.986004418e14;    // m^3/s^2
  double radius = 6378137.0 + 500e3;  // m
  bool planar = false;

  double rate() const;  // sqrt(mu / radius^3), rad/s
};

/// Continuous-time Clohessy-Wiltshire-Hill model with thrust inputs in N.
/// State [x y z vx vy vz] (6D) or [x y vx vy] (planar).
LtiSystem cwh_continuous(const CwhParams& params);

/// First-order-hold discretization of x' = Ac x + Bc u by the exponential of
///   [Ac Bc 0; 0 0 I/dt; 0 0 0] * dt = [Phi G1 G2; 0 I I; 0 0 I].
/// Returns A = Phi and B = G1 + (Phi - I) G2, the input matrix of the
/// shifted state x - G2 u that turns the hold into a one-step recursion.
LtiSystem foh_discretize(const MatrixXd& Ac, const MatrixXd& Bc, double dt);

LtiSystem cwh_discretize(const CwhParams& params, double dt);

/// States x(1)..x(N) by recursion. U is stacked N*m, W stacked N*n (or empty
/// for W = 0).
std::vector<VectorXd> propagate(const LtiSystem& sys, const VectorXd& x0,
                                const VectorXd& U, const VectorXd& W);

/// Covariance of Cw(k) W for W with block covariance diag(Sigma, ..., Sigma):
///   sum_{i<k} A^i Sigma (A^i)^T.
MatrixXd covariance_propagation(const MatrixXd& Sigma, const MatrixXd& A, int k);

}  // namespace ccplan
