#include "ccplan/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Sparse>

namespace ccplan {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// All inequality rows in one block, each scaled to unit max coefficient.
struct Rows {
  MatrixXd G;
  VectorXd h;
};

Rows stack_rows(const QpProblem& qp, bool& trivially_infeasible) {
  const Eigen::Index n = qp.size();
  std::vector<std::pair<VectorXd, double>> rows;
  auto add = [&](const VectorXd& a, double b) {
    const double scale = a.cwiseAbs().maxCoeff();
    if (scale == 0.0) {
      if (b < 0.0) trivially_infeasible = true;
      return;
    }
    rows.emplace_back(a / scale, b / scale);
  };
  for (Eigen::Index i = 0; i < qp.G.rows(); ++i) add(qp.G.row(i).transpose(), qp.g(i));
  for (Eigen::Index j = 0; j < qp.lb.size(); ++j) {
    if (std::isfinite(qp.lb(j))) add(-VectorXd::Unit(n, j), -qp.lb(j));
  }
  for (Eigen::Index j = 0; j < qp.ub.size(); ++j) {
    if (std::isfinite(qp.ub(j))) add(VectorXd::Unit(n, j), qp.ub(j));
  }
  Rows out{MatrixXd(static_cast<Eigen::Index>(rows.size()), n),
           VectorXd(static_cast<Eigen::Index>(rows.size()))};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.G.row(static_cast<Eigen::Index>(i)) = rows[i].first.transpose();
    out.h(static_cast<Eigen::Index>(i)) = rows[i].second;
  }
  return out;
}

double max_step(const VectorXd& v, const VectorXd& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  }
  return alpha;
}

// Orthonormal basis of the directions that neither P nor the rows GA see.
MatrixXd free_directions(const MatrixXd& P, const MatrixXd& GA) {
  MatrixXd stacked(P.rows() + GA.rows(), P.cols());
  stacked << P, GA;
  Eigen::FullPivLU<MatrixXd> lu(stacked);
  lu.setThreshold(1e-8);
  const MatrixXd kernel = lu.kernel();
  if (lu.dimensionOfKernel() == 0) return MatrixXd(P.cols(), 0);
  Eigen::HouseholderQR<MatrixXd> qr(kernel);
  return qr.householderQ() * MatrixXd::Identity(P.cols(), kernel.cols());
}

// Active-set re-solve started from the interior point solution. Rows are
// ranked by z/s; the confidently active ones (z > s) that are linearly
// independent form the first working set, which is then completed in rank
// order until no direction is left free, so the equality-constrained KKT
// system is nonsingular. The working set is repaired by adding violated rows
// and dropping rows with negative multipliers, as in a primal active-set
// method. Returns false (leaving x untouched) if the repair does not settle.
bool polish(const MatrixXd& P, const VectorXd& q, const Rows& rows, const VectorXd& s,
            const VectorXd& z, VectorXd& x) {
  const Eigen::Index n = x.size();
  const Eigen::Index m = z.size();
  const double row_tol = 1e-10 * (1.0 + rows.h.lpNorm<Eigen::Infinity>());
  const double z_tol = 1e-9 * (1.0 + z.lpNorm<Eigen::Infinity>());

  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return z(a) * s(b) > z(b) * s(a);
  });

  std::vector<Eigen::Index> work;
  std::vector<char> in(static_cast<std::size_t>(m), 0);
  std::vector<char> banned(static_cast<std::size_t>(m), 0);
  auto working_rows = [&]() {
    MatrixXd GA(static_cast<Eigen::Index>(work.size()), n);
    for (std::size_t k = 0; k < work.size(); ++k) {
      GA.row(static_cast<Eigen::Index>(k)) = rows.G.row(work[k]);
    }
    return GA;
  };
  // Coefficients of row i in the working rows, or empty if row i is
  // independent of them.
  auto dependence = [&](Eigen::Index i) -> VectorXd {
    if (work.empty()) return {};
    const MatrixXd GA = working_rows();
    Eigen::ColPivHouseholderQR<MatrixXd> qr(GA.transpose());
    const VectorXd g = rows.G.row(i).transpose();
    VectorXd lambda = qr.solve(g);
    if ((g - GA.transpose() * lambda).norm() > 1e-8 * g.norm()) return {};
    return lambda;
  };
  auto add = [&](Eigen::Index i) {
    work.push_back(i);
    in[static_cast<std::size_t>(i)] = 1;
  };
  // Adds rows in rank order until every direction is pinned; false if the
  // rows run out first.
  auto complete = [&]() {
    MatrixXd N = free_directions(P, working_rows());
    for (const Eigen::Index i : order) {
      if (N.cols() == 0) break;
      if (in[static_cast<std::size_t>(i)] || banned[static_cast<std::size_t>(i)]) continue;
      const VectorXd g = rows.G.row(i).transpose();
      VectorXd v = N.transpose() * g;
      const double vn = v.norm();
      if (vn <= 1e-6 * g.norm()) continue;
      add(i);
      // Drop the direction N v from the basis with a Householder reflection.
      v /= vn;
      v(0) += v(0) >= 0.0 ? 1.0 : -1.0;
      const MatrixXd NH = N - (N * v) * (2.0 / v.squaredNorm()) * v.transpose();
      N = NH.rightCols(N.cols() - 1);
    }
    return N.cols() == 0;
  };

  {
    std::vector<VectorXd> basis;
    for (const Eigen::Index i : order) {
      if (!(z(i) > s(i))) break;
      VectorXd v = rows.G.row(i).transpose();
      const double norm0 = v.norm();
      for (int pass = 0; pass < 2; ++pass) {
        for (const VectorXd& b : basis) v -= b.dot(v) * b;
      }
      const double norm = v.norm();
      if (norm <= 1e-6 * norm0) continue;
      basis.push_back(v / norm);
      add(i);
    }
  }
  if (!complete()) return false;

  for (int round = 0; round < 4 * static_cast<int>(n); ++round) {
    const auto na = static_cast<Eigen::Index>(work.size());
    const MatrixXd GA = working_rows();
    VectorXd hA(na);
    for (Eigen::Index k = 0; k < na; ++k) hA(k) = rows.h(work[static_cast<std::size_t>(k)]);
    MatrixXd K = MatrixXd::Zero(n + na, n + na);
    K.topLeftCorner(n, n) = P;
    K.topRightCorner(n, na) = GA.transpose();
    K.bottomLeftCorner(na, n) = GA;
    const Eigen::PartialPivLU<MatrixXd> lu(K);
    VectorXd rhs(n + na);
    rhs << -q, hA;
    VectorXd sol = lu.solve(rhs);
    for (int r = 0; r < 3; ++r) sol += lu.solve(rhs - K * sol);
    if (!sol.allFinite()) return false;
    const VectorXd xk = sol.head(n);
    const VectorXd y = sol.tail(na);
    if ((K * sol - rhs).lpNorm<Eigen::Infinity>() >
        1e-9 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) {
      return false;
    }

    const VectorXd slack = rows.G * xk - rows.h;
    if (na > 0) {
      Eigen::Index k = 0;
      if (y.minCoeff(&k) < -z_tol) {
        const Eigen::Index row = work[static_cast<std::size_t>(k)];
        work.erase(work.begin() + k);
        in[static_cast<std::size_t>(row)] = 0;
        banned[static_cast<std::size_t>(row)] = 1;
        if (!complete()) return false;
        continue;
      }
    }
    Eigen::Index worst_row = -1;
    double worst_viol = row_tol;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!in[static_cast<std::size_t>(i)] && slack(i) > worst_viol) {
        worst_viol = slack(i);
        worst_row = i;
      }
    }
    if (worst_row >= 0) {
      const VectorXd lambda = dependence(worst_row);
      if (lambda.size() > 0) {
        // Exchange: the row leaving is the one whose multiplier would reach
        // zero first as weight moves onto the violated row.
        Eigen::Index leave = -1;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < na; ++k) {
          if (lambda(k) > 1e-12) {
            const double ratio = std::max(y(k), 0.0) / lambda(k);
            if (ratio < best) {
              best = ratio;
              leave = k;
            }
          }
        }
        if (leave < 0) return false;
        in[static_cast<std::size_t>(work[static_cast<std::size_t>(leave)])] = 0;
        work.erase(work.begin() + leave);
      }
      add(worst_row);
      continue;
    }
    x = xk;
    return true;
  }
  return false;
}

}  // namespace

const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::kOptimal: return "optimal";
    case QpStatus::kInfeasible: return "infeasible";
    case QpStatus::kNumericalFailure: return "numerical_failure";
  }
  return "?";
}

void QpProblem::validate() const {
  const Eigen::Index n = h.size();
  if (H.rows() != n || H.cols() != n) throw std::invalid_argument("QP: H must be n x n");
  if (G.cols() != n && G.rows() > 0) throw std::invalid_argument("QP: G must have n columns");
  if (G.rows() != g.size()) throw std::invalid_argument("QP: G and g row counts differ");
  if ((lb.size() != 0 && lb.size() != n) || (ub.size() != 0 && ub.size() != n)) {
    throw std::invalid_argument("QP: bounds must be empty or length n");
  }
}

double QpProblem::max_violation(const VectorXd& x) const {
  double worst = 0.0;
  if (G.rows() > 0) worst = std::max(worst, (G * x - g).maxCoeff());
  for (Eigen::Index j = 0; j < lb.size(); ++j) worst = std::max(worst, lb(j) - x(j));
  for (Eigen::Index j = 0; j < ub.size(); ++j) worst = std::max(worst, x(j) - ub(j));
  return worst;
}

QpResult InteriorPointQp::solve(const QpProblem& qp) const {
  qp.validate();
  QpResult result;
  bool trivially_infeasible = false;
  Rows rows = stack_rows(qp, trivially_infeasible);
  if (trivially_infeasible) {
    result.status = QpStatus::kInfeasible;
    result.message = "a constraint row with zero coefficients has a negative bound";
    return result;
  }
  // Ruiz equilibration of [P G'; G 0]: the iteration runs on x = D xs with
  // rows scaled by E. Envelope rows with slopes spanning many decades are
  // otherwise too close to parallel for the polish step.
  MatrixXd P = qp.H;
  VectorXd q = qp.h;
  VectorXd D = VectorXd::Ones(qp.size());
  for (int pass = 0; pass < 20; ++pass) {
    VectorXd col(qp.size());
    for (Eigen::Index j = 0; j < qp.size(); ++j) {
      double c = P.col(j).cwiseAbs().maxCoeff();
      if (rows.G.rows() > 0) c = std::max(c, rows.G.col(j).cwiseAbs().maxCoeff());
      col(j) = c > 0.0 ? 1.0 / std::sqrt(c) : 1.0;
    }
    VectorXd row(rows.G.rows());
    for (Eigen::Index i = 0; i < rows.G.rows(); ++i) {
      const double r = rows.G.row(i).cwiseAbs().maxCoeff();
      row(i) = r > 0.0 ? 1.0 / std::sqrt(r) : 1.0;
    }
    if ((col.array() - 1.0).abs().maxCoeff() < 1e-3 &&
        (row.size() == 0 || (row.array() - 1.0).abs().maxCoeff() < 1e-3)) {
      break;
    }
    D = D.cwiseProduct(col);
    P = col.asDiagonal() * P * col.asDiagonal();
    q = q.cwiseProduct(col);
    rows.G = row.asDiagonal() * rows.G * col.asDiagonal();
    rows.h = rows.h.cwiseProduct(row);
  }
  // Linearization rows touch two variables each, so the row block is mostly
  // zeros; the normal matrix is assembled from a sparse copy.
  const Eigen::SparseMatrix<double> Gs = rows.G.sparseView();
  const auto& G = Gs;
  const VectorXd& h = rows.h;
  const Eigen::Index m = h.size();
  const double tol = options_.tolerance;

  if (m == 0) {
    Eigen::LDLT<MatrixXd> ldlt(P);
    result.x = D.cwiseProduct(ldlt.solve(-q));
    if (ldlt.info() != Eigen::Success || !result.x.allFinite() ||
        (qp.H * result.x + qp.h).lpNorm<Eigen::Infinity>() > 1e-8 * (1.0 + q.lpNorm<Eigen::Infinity>())) {
      result.status = QpStatus::kNumericalFailure;
      result.message = "unconstrained problem is unbounded or singular";
      return result;
    }
    result.status = QpStatus::kOptimal;
    result.objective = qp.objective(result.x);
    return result;
  }

  // Starting point (Mehrotra's heuristic): least-squares primal and dual
  // estimates, shifted into the positive orthant and then balanced so that
  // neither s nor z starts far from the other's complementarity scale.
  VectorXd x;
  VectorXd s;
  VectorXd z;
  {
    MatrixXd K = P + MatrixXd(G.transpose() * G);
    K.diagonal().array() += 1e-8 * (1.0 + K.diagonal().cwiseAbs().maxCoeff());
    const Eigen::LDLT<MatrixXd> ldlt(K);
    x = ldlt.solve(-q + G.transpose() * h);
    s = h - G * x;
    // z = G w with w solving G'G w = -(P x + q) is the least-squares dual.
    z = G * ldlt.solve(-(P * x + q));
    const double ds = std::max(-1.5 * s.minCoeff(), 0.0);
    const double dz = std::max(-1.5 * z.minCoeff(), 0.0);
    s.array() += ds;
    z.array() += dz;
    const double sz = s.dot(z);
    const double bump_s = 0.5 * sz / std::max(z.sum(), 1e-300);
    const double bump_z = 0.5 * sz / std::max(s.sum(), 1e-300);
    s.array() += bump_s + 1e-8;
    z.array() += bump_z + 1e-8;
  }

  const double q_norm = 1.0 + q.lpNorm<Eigen::Infinity>();
  const double reg = 1e-14 * (1.0 + P.diagonal().cwiseAbs().maxCoeff());
  const double h_norm = 1.0 + h.lpNorm<Eigen::Infinity>();
  bool converged = false;
  int it = 0;
  for (; it < options_.max_iterations; ++it) {
    const VectorXd rd = P * x + q + G.transpose() * z;
    const VectorXd rp = G * x + s - h;
    const double mu = s.dot(z) / static_cast<double>(m);
    if (rp.lpNorm<Eigen::Infinity>() <= tol * h_norm &&
        rd.lpNorm<Eigen::Infinity>() <= tol * q_norm && mu <= tol) {
      converged = true;
      break;
    }
    const double hz = h.dot(z);
    if (hz < 0.0 && (G.transpose() * z).lpNorm<Eigen::Infinity>() <= 1e-9 * -hz &&
        z.lpNorm<Eigen::Infinity>() > 1e6) {
      result.status = QpStatus::kInfeasible;
      result.iterations = it;
      result.message = "interior point found an infeasibility certificate";
      return result;
    }

    const VectorXd D = z.cwiseQuotient(s);
    const Eigen::SparseMatrix<double> GD = D.asDiagonal() * Gs;
    const MatrixXd K = P + MatrixXd(Gs.transpose() * GD);
    MatrixXd Kreg = K;
    Kreg.diagonal().array() += reg;
    const Eigen::LDLT<MatrixXd> ldlt(Kreg);
    if (ldlt.info() != Eigen::Success) break;

    auto newton = [&](const VectorXd& rc, VectorXd& dx, VectorXd& ds, VectorXd& dz) {
      const VectorXd rhs = -rd - G.transpose() * (D.cwiseProduct(rp) + rc.cwiseQuotient(s));
      dx = ldlt.solve(rhs);
      for (int r = 0; r < 2; ++r) dx += ldlt.solve(rhs - K * dx);
      dz = D.cwiseProduct(G * dx + rp) + rc.cwiseQuotient(s);
      ds = (rc - s.cwiseProduct(dz)).cwiseQuotient(z);
    };

    VectorXd dx, ds, dz;
    newton(-s.cwiseProduct(z), dx, ds, dz);
    const double a_aff = std::min(max_step(s, ds), max_step(z, dz));
    const double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / static_cast<double>(m);
    const double sigma = std::pow(mu_aff / mu, 3.0);
    const VectorXd rc = -s.cwiseProduct(z) - ds.cwiseProduct(dz) +
                        VectorXd::Constant(m, sigma * mu);
    newton(rc, dx, ds, dz);
    const double alpha = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(z, dz)));
    x += alpha * dx;
    s += alpha * ds;
    z += alpha * dz;
    if (!x.allFinite() || !s.allFinite() || !z.allFinite()) break;
  }
  result.iterations = it;

  if (!converged && x.allFinite() && s.allFinite() && z.allFinite()) {
    // Stalled at the limit of double precision in the normal equations;
    // accept when close and let the polish step finish the job.
    const VectorXd rd = P * x + q + G.transpose() * z;
    const VectorXd rp = G * x + s - h;
    converged = rp.lpNorm<Eigen::Infinity>() <= 1e-9 * h_norm &&
                rd.lpNorm<Eigen::Infinity>() <= 1e-7 * q_norm &&
                s.dot(z) / static_cast<double>(m) <= 1e-9;
  }

  if (!converged) {
    const double hz = h.dot(z);
    if (z.allFinite() && hz < 0.0 &&
        (G.transpose() * z).lpNorm<Eigen::Infinity>() <= 1e-6 * -hz) {
      result.status = QpStatus::kInfeasible;
      result.message = "interior point stalled with an infeasibility certificate";
      return result;
    }
    result.status = QpStatus::kNumericalFailure;
    result.message = "interior point did not converge in " + std::to_string(it) + " iterations";
    result.x = D.cwiseProduct(x);
    return result;
  }

  if (options_.polish) result.polished = polish(P, q, rows, s, z, x);
  result.status = QpStatus::kOptimal;
  result.x = D.cwiseProduct(x);
  result.objective = qp.objective(result.x);
  return result;
}

}  // namespace ccplan
