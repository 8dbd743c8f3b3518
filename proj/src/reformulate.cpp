#include "ccplan/reformulate.hpp"

#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace ccplan {
namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument("scenario: " + msg);
}

double largest_eigenvalue(const MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues().maxCoeff());
}

// Row sums of |rows| weighted by per-state Cauchy scales repeated over steps.
VectorXd cauchy_scales(const MatrixXd& rows, const VectorXd& gamma) {
  const Eigen::Index n = gamma.size();
  VectorXd out = VectorXd::Zero(rows.rows());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) out(r) += std::abs(rows(r, j)) * gamma(j % n);
  }
  return out;
}

void check_vehicle(const Scenario& scn, int v) {
  if (v < 0 || v >= static_cast<int>(scn.vehicles.size())) {
    throw std::out_of_range("vehicle index " + std::to_string(v) + " out of range");
  }
}

void check_pair(const Scenario& scn, int i, int j, int k) {
  check_vehicle(scn, i);
  check_vehicle(scn, j);
  if (i == j) throw std::invalid_argument("collision constraint needs two distinct vehicles");
  if (k < 1 || k > scn.horizon) throw std::out_of_range("step out of range");
}

CompiledConstraint terminal_face(const Scenario& scn, const ConcatDynamics& dyn, int vehicle,
                                 const Eigen::RowVectorXd& row, double bound, int face) {
  const Eigen::Index len = scn.inputs_per_vehicle();
  const Vehicle& veh = scn.vehicles[static_cast<std::size_t>(vehicle)];
  CompiledConstraint cc;
  cc.kind = ConstraintKind::kConvexUpper;
  cc.a = Eigen::RowVectorXd::Zero(scn.decision_size());
  cc.a.segment(vehicle * len, len) = row * dyn.cu(scn.horizon);
  cc.b = row.dot(dyn.a_pow(scn.horizon) * veh.x0);
  cc.c = bound;
  cc.group = RiskGroup::kTerminal;
  cc.vehicle = vehicle;
  cc.step = scn.horizon;
  cc.face = face;
  return cc;
}

CompiledConstraint separation(const Scenario& scn, const ConcatDynamics& dyn, int i, int j,
                              int k) {
  const Eigen::Index len = scn.inputs_per_vehicle();
  const auto& vi = scn.vehicles[static_cast<std::size_t>(i)];
  const auto& vj = scn.vehicles[static_cast<std::size_t>(j)];
  CompiledConstraint cc;
  cc.kind = ConstraintKind::kReverseConvexLower;
  const MatrixXd SC = scn.S * dyn.cu(k);
  cc.M = MatrixXd::Zero(scn.S.rows(), scn.decision_size());
  cc.M.middleCols(i * len, len) = SC;
  cc.M.middleCols(j * len, len) = -SC;
  cc.v = scn.S * dyn.a_pow(k) * (vi.x0 - vj.x0);
  cc.c = scn.r;
  cc.group = RiskGroup::kAvoidance;
  cc.vehicle = i;
  cc.other = j;
  cc.step = k;
  return cc;
}

DistributionPtr chi_for(Eigen::Index dims) {
  if (dims != 2 && dims != 3) {
    throw std::invalid_argument("Gaussian separation bound needs S with 2 or 3 rows, got " +
                                std::to_string(dims));
  }
  return shared_distribution(dims == 2 ? "chi2" : "chi3");
}

}  // namespace

bool Polytope::contains(const VectorXd& x, double tol) const {
  return ((P * x - p).array() <= tol).all();
}

void Polytope::validate(Eigen::Index dim) const {
  if (P.rows() < 1 || P.rows() != p.size()) {
    throw std::invalid_argument("polytope: need at least one face and one bound per face");
  }
  if (P.cols() != dim) {
    throw std::invalid_argument("polytope: face normals have " + std::to_string(P.cols()) +
                                " entries, expected " + std::to_string(dim));
  }
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    if (P.row(i).cwiseAbs().maxCoeff() == 0.0) {
      throw std::invalid_argument("polytope: face " + std::to_string(i) + " is zero");
    }
  }
}

Polytope Polytope::box(const VectorXd& lo, const VectorXd& hi) {
  if (lo.size() != hi.size() || lo.size() == 0) {
    throw std::invalid_argument("box: bounds must be non-empty and equal length");
  }
  const Eigen::Index n = lo.size();
  Polytope poly;
  poly.P = MatrixXd::Zero(2 * n, n);
  poly.p = VectorXd::Zero(2 * n);
  for (Eigen::Index d = 0; d < n; ++d) {
    if (!(lo(d) <= hi(d))) throw std::invalid_argument("box: lo exceeds hi");
    poly.P(2 * d, d) = 1.0;
    poly.p(2 * d) = hi(d);
    poly.P(2 * d + 1, d) = -1.0;
    poly.p(2 * d + 1) = -lo(d);
  }
  return poly;
}

bool Disturbance::is_zero() const {
  if (kind == DisturbanceKind::kGaussian) return sigma.size() == 0 || sigma.isZero(0.0);
  return gamma.size() == 0 || gamma.isZero(0.0);
}

void Scenario::validate() const {
  system.validate();
  const Eigen::Index n = system.n();
  const Eigen::Index m = system.m();
  require(horizon >= 1, "horizon must be at least 1");
  require(!vehicles.empty(), "at least one vehicle is required");
  require(u_lo.size() == m && u_hi.size() == m, "input bounds need one entry per input");
  require((u_lo.array() <= u_hi.array()).all(), "input lower bound exceeds upper bound");
  require(S.rows() >= 1 && S.cols() == n, "S must have n columns");
  require(r > 0.0, "separation r must be positive");
  for (double a : {alpha_terminal, alpha_avoid, alpha_obstacle}) {
    require(a > 0.0 && a < 0.5, "violation thresholds must lie in (0, 0.5)");
  }
  for (std::size_t v = 0; v < vehicles.size(); ++v) {
    require(vehicles[v].x0.size() == n,
            "vehicle " + std::to_string(v) + " initial state has wrong dimension");
    vehicles[v].target.validate(n);
  }
  if (disturbance.kind == DisturbanceKind::kGaussian) {
    require(disturbance.sigma.rows() == n && disturbance.sigma.cols() == n,
            "Gaussian covariance must be n x n");
    require((disturbance.sigma - disturbance.sigma.transpose()).cwiseAbs().maxCoeff() <=
                1e-12 * std::max(1.0, disturbance.sigma.cwiseAbs().maxCoeff()),
            "Gaussian covariance must be symmetric");
  } else {
    require(disturbance.gamma.size() == n, "Cauchy scales need one entry per state");
    require((disturbance.gamma.array() >= 0.0).all(), "Cauchy scales must be non-negative");
  }
  for (const auto& o : obstacles) {
    require(o.center.size() == S.rows(), "obstacle center must match the rows of S");
    require(o.radius > 0.0, "obstacle radius must be positive");
  }
}

const char* to_string(ConstraintKind kind) {
  return kind == ConstraintKind::kConvexUpper ? "convex" : "reverse_convex";
}

const char* to_string(RiskGroup group) {
  switch (group) {
    case RiskGroup::kTerminal: return "terminal";
    case RiskGroup::kAvoidance: return "avoidance";
    case RiskGroup::kObstacle: return "obstacle";
  }
  return "?";
}

double CompiledConstraint::f(const VectorXd& U) const {
  if (kind == ConstraintKind::kConvexUpper) return a.dot(U) + b;
  return (M * U + v).norm();
}

std::string CompiledConstraint::label() const {
  std::ostringstream os;
  os << to_string(group) << "[v" << vehicle;
  if (other >= 0) os << (group == RiskGroup::kObstacle ? ",o" : ",v") << other;
  os << ",k" << step;
  if (face >= 0) os << ",face" << face;
  os << "]";
  return os.str();
}

DistributionPtr shared_distribution(const std::string& name) {
  static std::mutex mu;
  static std::map<std::string, DistributionPtr> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(name);
  if (it == cache.end()) it = cache.emplace(name, builtin_distribution(name)).first;
  return it->second;
}

std::vector<CompiledConstraint> compile_terminal_gaussian(const Scenario& scn,
                                                          const ConcatDynamics& dyn,
                                                          int vehicle) {
  check_vehicle(scn, vehicle);
  if (scn.disturbance.kind != DisturbanceKind::kGaussian) {
    throw std::invalid_argument("compile_terminal_gaussian: disturbance is not Gaussian");
  }
  const Polytope& target = scn.vehicles[static_cast<std::size_t>(vehicle)].target;
  const MatrixXd sigma_N = covariance_propagation(scn.disturbance.sigma, scn.system.A, scn.horizon);
  std::vector<CompiledConstraint> out;
  for (Eigen::Index i = 0; i < target.faces(); ++i) {
    const Eigen::RowVectorXd row = target.P.row(i);
    CompiledConstraint cc = terminal_face(scn, dyn, vehicle, row, target.p(i), static_cast<int>(i));
    cc.g = std::sqrt(std::max(0.0, (row * sigma_N * row.transpose())(0, 0)));
    cc.dist = shared_distribution("gaussian");
    out.push_back(std::move(cc));
  }
  return out;
}

CompiledConstraint compile_collision_gaussian(const Scenario& scn, const ConcatDynamics& dyn,
                                              int i, int j, int k) {
  check_pair(scn, i, j, k);
  if (scn.disturbance.kind != DisturbanceKind::kGaussian) {
    throw std::invalid_argument("compile_collision_gaussian: disturbance is not Gaussian");
  }
  CompiledConstraint cc = separation(scn, dyn, i, j, k);
  const MatrixXd sigma_k = covariance_propagation(scn.disturbance.sigma, scn.system.A, k);
  // |S Cw (W_i - W_j)| <= |(2 S Sigma(k) S^T)^{1/2}|_2 |rho|, rho ~ N(0, I)
  cc.g = std::sqrt(2.0 * largest_eigenvalue(scn.S * sigma_k * scn.S.transpose()));
  cc.dist = chi_for(scn.S.rows());
  return cc;
}

std::vector<CompiledConstraint> compile_terminal_cauchy(const Scenario& scn,
                                                        const ConcatDynamics& dyn,
                                                        int vehicle) {
  check_vehicle(scn, vehicle);
  if (scn.disturbance.kind != DisturbanceKind::kCauchy) {
    throw std::invalid_argument("compile_terminal_cauchy: disturbance is not Cauchy");
  }
  const Polytope& target = scn.vehicles[static_cast<std::size_t>(vehicle)].target;
  const MatrixXd& cw = dyn.cw(scn.horizon);
  std::vector<CompiledConstraint> out;
  for (Eigen::Index i = 0; i < target.faces(); ++i) {
    Eigen::RowVectorXd row = target.P.row(i);
    Eigen::Index axis = 0;
    const double scale = row.cwiseAbs().maxCoeff(&axis);
    if ((row.array() != 0.0).count() != 1) {
      throw std::invalid_argument(
          "Cauchy terminal constraints need axis-aligned faces (face " + std::to_string(i) +
          " mixes states); a combination of several Cauchy states is not a single-variable "
          "Cauchy bound");
    }
    row /= scale;
    CompiledConstraint cc =
        terminal_face(scn, dyn, vehicle, row, target.p(i) / scale, static_cast<int>(i));
    cc.g = cauchy_scales(row * cw, scn.disturbance.gamma)(0);
    cc.dist = shared_distribution("cauchy");
    out.push_back(std::move(cc));
  }
  return out;
}

CompiledConstraint compile_collision_cauchy(const Scenario& scn, const ConcatDynamics& dyn,
                                            int i, int j, int k) {
  check_pair(scn, i, j, k);
  if (scn.disturbance.kind != DisturbanceKind::kCauchy) {
    throw std::invalid_argument("compile_collision_cauchy: disturbance is not Cauchy");
  }
  if (scn.S.rows() != 2) {
    throw std::invalid_argument("Cauchy separation bound needs a planar S (2 rows)");
  }
  CompiledConstraint cc = separation(scn, dyn, i, j, k);
  cc.g = cauchy_scales(scn.S * dyn.cw(k), scn.disturbance.gamma).maxCoeff();
  cc.dist = shared_distribution("cauchy_norm2");
  return cc;
}

CompiledConstraint compile_obstacle(const Scenario& scn, const ConcatDynamics& dyn, int vehicle,
                                    int obstacle, int k) {
  check_vehicle(scn, vehicle);
  if (obstacle < 0 || obstacle >= static_cast<int>(scn.obstacles.size())) {
    throw std::out_of_range("obstacle index out of range");
  }
  if (k < 1 || k > scn.horizon) throw std::out_of_range("step out of range");
  const Eigen::Index len = scn.inputs_per_vehicle();
  const auto& veh = scn.vehicles[static_cast<std::size_t>(vehicle)];
  const auto& obs = scn.obstacles[static_cast<std::size_t>(obstacle)];
  CompiledConstraint cc;
  cc.kind = ConstraintKind::kReverseConvexLower;
  cc.M = MatrixXd::Zero(scn.S.rows(), scn.decision_size());
  cc.M.middleCols(vehicle * len, len) = scn.S * dyn.cu(k);
  cc.v = scn.S * dyn.a_pow(k) * veh.x0 - obs.center;
  cc.c = obs.radius;
  cc.group = RiskGroup::kObstacle;
  cc.vehicle = vehicle;
  cc.other = obstacle;
  cc.step = k;
  if (scn.disturbance.kind == DisturbanceKind::kGaussian) {
    const MatrixXd sigma_k = covariance_propagation(scn.disturbance.sigma, scn.system.A, k);
    cc.g = std::sqrt(largest_eigenvalue(scn.S * sigma_k * scn.S.transpose()));
    cc.dist = chi_for(scn.S.rows());
  } else {
    if (scn.S.rows() != 2) {
      throw std::invalid_argument("Cauchy obstacle bound needs a planar S (2 rows)");
    }
    cc.g = cauchy_scales(scn.S * dyn.cw(k), scn.disturbance.gamma).maxCoeff();
    cc.dist = shared_distribution("cauchy_norm2");
  }
  return cc;
}

std::vector<CompiledConstraint> catalog(const Scenario& scn) {
  scn.validate();
  const ConcatDynamics dyn(scn.system, scn.horizon);
  const bool gaussian = scn.disturbance.kind == DisturbanceKind::kGaussian;
  const int count = static_cast<int>(scn.vehicles.size());
  std::vector<CompiledConstraint> out;
  for (int v = 0; v < count; ++v) {
    auto faces = gaussian ? compile_terminal_gaussian(scn, dyn, v) : compile_terminal_cauchy(scn, dyn, v);
    for (auto& cc : faces) out.push_back(std::move(cc));
  }
  for (int i = 0; i < count; ++i) {
    for (int j = i + 1; j < count; ++j) {
      for (int k = 1; k <= scn.horizon; ++k) {
        out.push_back(gaussian ? compile_collision_gaussian(scn, dyn, i, j, k)
                               : compile_collision_cauchy(scn, dyn, i, j, k));
      }
    }
  }
  for (int v = 0; v < count; ++v) {
    for (int o = 0; o < static_cast<int>(scn.obstacles.size()); ++o) {
      for (int k = 1; k <= scn.horizon; ++k) out.push_back(compile_obstacle(scn, dyn, v, o, k));
    }
  }
  return out;
}

}  // namespace ccplan
