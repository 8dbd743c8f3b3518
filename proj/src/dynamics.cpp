#include "ccplan/dynamics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <unsupported/Eigen/MatrixFunctions>

namespace ccplan {

void LtiSystem::validate() const {
  if (A.rows() == 0 || A.rows() != A.cols()) {
    throw std::invalid_argument("LtiSystem: A must be square and non-empty");
  }
  if (B.rows() != A.rows() || B.cols() == 0) {
    throw std::invalid_argument("LtiSystem: B must have n rows and at least one column");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("LtiSystem: dt must be positive");
}

ConcatDynamics::ConcatDynamics(const LtiSystem& sys, int horizon)
    : horizon_(horizon), n_(sys.n()), m_(sys.m()) {
  sys.validate();
  if (horizon < 1) throw std::invalid_argument("concat: horizon must be at least 1");
  const Eigen::Index N = horizon;
  a_pow_.reserve(static_cast<std::size_t>(N) + 1);
  a_pow_.push_back(MatrixXd::Identity(n_, n_));
  for (int k = 1; k <= horizon; ++k) a_pow_.push_back(sys.A * a_pow_.back());

  cu_.resize(static_cast<std::size_t>(N) + 1);
  cw_.resize(static_cast<std::size_t>(N) + 1);
  for (int k = 1; k <= horizon; ++k) {
    MatrixXd cu = MatrixXd::Zero(n_, N * m_);
    MatrixXd cw = MatrixXd::Zero(n_, N * n_);
    for (int j = 0; j < k; ++j) {
      // input/disturbance at step j reaches x(k) through A^{k-1-j}
      const MatrixXd& P = a_pow_[static_cast<std::size_t>(k - 1 - j)];
      cu.block(0, j * m_, n_, m_) = P * sys.B;
      cw.block(0, j * n_, n_, n_) = P;
    }
    cu_[static_cast<std::size_t>(k)] = std::move(cu);
    cw_[static_cast<std::size_t>(k)] = std::move(cw);
  }
}

const MatrixXd& ConcatDynamics::a_pow(int k) const {
  if (k < 0 || k > horizon_) throw std::out_of_range("ConcatDynamics: step out of range");
  return a_pow_[static_cast<std::size_t>(k)];
}

const MatrixXd& ConcatDynamics::cu(int k) const {
  if (k < 1 || k > horizon_) throw std::out_of_range("ConcatDynamics: step out of range");
  return cu_[static_cast<std::size_t>(k)];
}

const MatrixXd& ConcatDynamics::cw(int k) const {
  if (k < 1 || k > horizon_) throw std::out_of_range("ConcatDynamics: step out of range");
  return cw_[static_cast<std::size_t>(k)];
}

VectorXd ConcatDynamics::state(int k, const VectorXd& x0, const VectorXd& U,
                               const VectorXd& W) const {
  if (k == 0) return x0;
  VectorXd x = a_pow(k) * x0 + cu(k) * U;
  if (W.size() > 0) x += cw(k) * W;
  return x;
}

ConcatDynamics concat(const LtiSystem& sys, int horizon) { return ConcatDynamics(sys, horizon); }

double CwhParams::rate() const {
  if (!(mass > 0.0 && mu > 0.0 && radius > 0.0)) {
    throw std::invalid_argument("CwhParams: mass, mu and radius must be positive");
  }
  return std::sqrt(mu / (radius * radius * radius));
}

LtiSystem cwh_continuous(const CwhParams& params) {
  const double w = params.rate();
  const Eigen::Index axes = params.planar ? 2 : 3;
  const Eigen::Index n = 2 * axes;
  LtiSystem sys;
  sys.A = MatrixXd::Zero(n, n);
  sys.B = MatrixXd::Zero(n, axes);
  sys.A.topRightCorner(axes, axes).setIdentity();
  sys.A(axes + 0, 0) = 3.0 * w * w;
  sys.A(axes + 0, axes + 1) = 2.0 * w;
  sys.A(axes + 1, axes + 0) = -2.0 * w;
  if (!params.planar) sys.A(axes + 2, 2) = -w * w;
  sys.B.bottomRows(axes).diagonal().setConstant(1.0 / params.mass);
  sys.dt = 0.0;
  return sys;
}

LtiSystem foh_discretize(const MatrixXd& Ac, const MatrixXd& Bc, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("foh_discretize: dt must be positive");
  if (Ac.rows() != Ac.cols() || Bc.rows() != Ac.rows()) {
    throw std::invalid_argument("foh_discretize: inconsistent shapes");
  }
  const Eigen::Index n = Ac.rows();
  const Eigen::Index m = Bc.cols();
  MatrixXd M = MatrixXd::Zero(n + 2 * m, n + 2 * m);
  M.topLeftCorner(n, n) = Ac * dt;
  M.block(0, n, n, m) = Bc * dt;
  M.block(n, n + m, m, m).setIdentity();
  const MatrixXd E = M.exp();
  const MatrixXd Phi = E.topLeftCorner(n, n);
  const MatrixXd G1 = E.block(0, n, n, m);
  const MatrixXd G2 = E.block(0, n + m, n, m);
  LtiSystem sys;
  sys.A = Phi;
  sys.B = G1 + (Phi - MatrixXd::Identity(n, n)) * G2;
  sys.dt = dt;
  return sys;
}

LtiSystem cwh_discretize(const CwhParams& params, double dt) {
  const LtiSystem c = cwh_continuous(params);
  return foh_discretize(c.A, c.B, dt);
}

std::vector<VectorXd> propagate(const LtiSystem& sys, const VectorXd& x0,
                                const VectorXd& U, const VectorXd& W) {
  sys.validate();
  const Eigen::Index n = sys.n();
  const Eigen::Index m = sys.m();
  if (x0.size() != n) throw std::invalid_argument("propagate: x0 has wrong dimension");
  if (U.size() == 0 || U.size() % m != 0) {
    throw std::invalid_argument("propagate: U length must be a positive multiple of m");
  }
  const Eigen::Index N = U.size() / m;
  if (W.size() != 0 && W.size() != N * n) {
    throw std::invalid_argument("propagate: W length " + std::to_string(W.size()) +
                                " does not match horizon " + std::to_string(N));
  }
  std::vector<VectorXd> states;
  states.reserve(static_cast<std::size_t>(N));
  VectorXd x = x0;
  for (Eigen::Index k = 0; k < N; ++k) {
    VectorXd next = sys.A * x + sys.B * U.segment(k * m, m);
    if (W.size() != 0) next += W.segment(k * n, n);
    states.push_back(next);
    x = std::move(next);
  }
  return states;
}

MatrixXd covariance_propagation(const MatrixXd& Sigma, const MatrixXd& A, int k) {
  if (Sigma.rows() != Sigma.cols() || A.rows() != A.cols() || A.rows() != Sigma.rows()) {
    throw std::invalid_argument("covariance_propagation: inconsistent shapes");
  }
  if (k < 1) throw std::invalid_argument("covariance_propagation: k must be at least 1");
  const double scale = std::max(1.0, Sigma.cwiseAbs().maxCoeff());
  if ((Sigma - Sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("covariance_propagation: Sigma must be symmetric");
  }
  MatrixXd out = MatrixXd::Zero(Sigma.rows(), Sigma.cols());
  MatrixXd P = MatrixXd::Identity(A.rows(), A.cols());
  for (int i = 0; i < k; ++i) {
    out += P * Sigma * P.transpose();
    P = A * P;
  }
  return 0.5 * (out + out.transpose());
}

}  // namespace ccplan
