#include "ccplan/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ccplan {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double group_alpha(const Scenario& scn, RiskGroup group) {
  switch (group) {
    case RiskGroup::kTerminal: return scn.alpha_terminal;
    case RiskGroup::kAvoidance: return scn.alpha_avoid;
    case RiskGroup::kObstacle: return scn.alpha_obstacle;
  }
  return 0.0;
}

const PwaQuantile& pwa_for(const PwaMap& pwa, const CompiledConstraint& cc) {
  auto it = pwa.find(cc.dist->name());
  if (it == pwa.end()) {
    throw std::invalid_argument("no piecewise-affine quantile for distribution '" +
                                cc.dist->name() + "' (needed by " + cc.label() + ")");
  }
  return it->second;
}

struct RiskRange {
  double lo;
  double hi;
};

RiskRange risk_range(const Scenario& scn, const CompiledConstraint& cc, const PwaQuantile& q,
                     const SolverOptions& options) {
  RiskRange r{std::max(options.risk_floor, 1.0 - q.p_hi),
              std::min(group_alpha(scn, cc.group), 1.0 - q.p_lo)};
  if (r.lo > r.hi) {
    throw std::invalid_argument("quantile range of '" + q.dist_name +
                                "' leaves no admissible risk for " + cc.label());
  }
  return r;
}

std::vector<CompiledConstraint> convex_only(const std::vector<CompiledConstraint>& cat) {
  std::vector<CompiledConstraint> out;
  std::copy_if(cat.begin(), cat.end(), std::back_inserter(out),
               [](const CompiledConstraint& cc) { return cc.kind == ConstraintKind::kConvexUpper; });
  return out;
}

void append_row(std::vector<std::pair<Eigen::RowVectorXd, double>>& rows, Eigen::RowVectorXd a,
                double b) {
  rows.emplace_back(std::move(a), b);
}

Solution unpack(const Scenario& scn, const DecisionLayout& layout,
                const std::vector<CompiledConstraint>& cat, const VectorXd& x) {
  Solution sol;
  sol.U = x.head(layout.u_size);
  const Eigen::Index len = scn.inputs_per_vehicle();
  for (std::size_t v = 0; v < scn.vehicles.size(); ++v) {
    sol.inputs.push_back(sol.U.segment(static_cast<Eigen::Index>(v) * len, len));
  }
  const auto count = static_cast<Eigen::Index>(cat.size());
  sol.risk = VectorXd::Zero(count);
  sol.s = VectorXd::Zero(count);
  sol.t = VectorXd::Zero(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    const int ri = layout.risk_index[static_cast<std::size_t>(i)];
    const int ti = layout.t_index[static_cast<std::size_t>(i)];
    if (ri >= 0) {
      sol.risk(i) = x(layout.risk_offset + ri);
      sol.s(i) = x(layout.s_offset + ri);
    }
    if (ti >= 0) sol.t(i) = std::max(0.0, x(layout.t_offset + ti));
  }
  sol.cost = sol.U.squaredNorm();
  return sol;
}

}  // namespace

PwaMap build_pwa_map(const Scenario& scn, const std::vector<CompiledConstraint>& cat,
                     const PwaBuildOptions& options) {
  std::map<std::string, std::pair<DistributionPtr, double>> needed;
  for (const auto& cc : cat) {
    if (cc.deterministic()) continue;
    auto& entry = needed[cc.dist->name()];
    entry.first = cc.dist;
    entry.second = std::max(entry.second, group_alpha(scn, cc.group));
  }
  PwaMap out;
  for (const auto& [name, entry] : needed) {
    const ScalarDistribution& dist = *entry.first;
    const double p_lo = std::max(dist.anchor().p, 1.0 - entry.second);
    QuantileTable table;
    if (options.analytic && dist.has_analytic_quantile()) {
      table = analytic_table(dist, p_lo, options.h, options.p_max);
    } else {
      table = restrict_range(taylor_walk(dist, dist.anchor().p, dist.anchor().q, options.h,
                                         options.p_max, options.n_d),
                             p_lo, options.p_max);
    }
    out.emplace(name, pwa_reduce(table, options.xi));
  }
  return out;
}

DecisionLayout DecisionLayout::build(Eigen::Index u_size, const std::vector<CompiledConstraint>& cat) {
  DecisionLayout layout;
  layout.u_size = u_size;
  int risk = 0;
  int slack = 0;
  for (const auto& cc : cat) {
    layout.risk_index.push_back(cc.deterministic() ? -1 : risk++);
    layout.t_index.push_back(cc.kind == ConstraintKind::kReverseConvexLower ? slack++ : -1);
  }
  layout.risk_offset = u_size;
  layout.risk_size = risk;
  layout.s_offset = layout.risk_offset + risk;
  layout.t_offset = layout.s_offset + risk;
  layout.t_size = slack;
  layout.total = layout.t_offset + slack;
  return layout;
}

QpProblem build_iterate_qp(const Scenario& scn, const std::vector<CompiledConstraint>& cat,
                           const PwaMap& pwa, const DecisionLayout& layout,
                           const VectorXd& U_ref, double tau, const SolverOptions& options) {
  if (U_ref.size() != layout.u_size) {
    throw std::invalid_argument("build_iterate_qp: U_ref has " + std::to_string(U_ref.size()) +
                                " entries, layout expects " + std::to_string(layout.u_size));
  }
  if (layout.risk_index.size() != cat.size()) {
    throw std::invalid_argument("build_iterate_qp: layout does not match the catalog");
  }
  const Eigen::Index nx = layout.total;
  QpProblem qp;
  qp.H = MatrixXd::Zero(nx, nx);
  qp.H.topLeftCorner(layout.u_size, layout.u_size).diagonal().setConstant(2.0);
  qp.h = VectorXd::Zero(nx);
  qp.h.segment(layout.t_offset, layout.t_size).setConstant(tau);
  qp.lb = VectorXd::Constant(nx, -kInf);
  qp.ub = VectorXd::Constant(nx, kInf);

  const Eigen::Index m = scn.system.m();
  for (Eigen::Index j = 0; j < layout.u_size; ++j) {
    qp.lb(j) = scn.u_lo(j % m);
    qp.ub(j) = scn.u_hi(j % m);
  }
  qp.lb.segment(layout.t_offset, layout.t_size).setZero();

  std::vector<std::pair<Eigen::RowVectorXd, double>> rows;
  std::map<RiskGroup, Eigen::RowVectorXd> budgets;

  for (std::size_t i = 0; i < cat.size(); ++i) {
    const CompiledConstraint& cc = cat[i];
    const int ri = layout.risk_index[i];
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(nx);
    double rhs = 0.0;

    if (cc.kind == ConstraintKind::kConvexUpper) {
      // a U + g s <= c - b
      row.head(layout.u_size) = cc.a;
      rhs = cc.c - cc.b;
    } else {
      // |M U + v| >= c + g s, linearized at U_ref and relaxed by t:
      //   -d U + g s - t <= f0 - d U_ref - c
      const VectorXd r = cc.M * U_ref + cc.v;
      const double f0 = r.norm();
      Eigen::RowVectorXd d;
      if (f0 > 0.0) {
        d = (r / f0).transpose() * cc.M;
      } else {
        Eigen::Index k = 0;
        while (k < cc.M.rows() && cc.M.row(k).isZero(0.0)) ++k;
        if (k == cc.M.rows()) {
          d = Eigen::RowVectorXd::Zero(cc.M.cols());
        } else {
          d = cc.M.row(k) / cc.M.row(k).norm();
        }
      }
      row.head(layout.u_size) = -d;
      row(layout.t_offset + layout.t_index[i]) = -1.0;
      rhs = f0 - d.dot(U_ref) - cc.c;
    }

    if (ri >= 0) {
      const PwaQuantile& q = pwa_for(pwa, cc);
      const RiskRange range = risk_range(scn, cc, q, options);
      const Eigen::Index w = layout.risk_offset + ri;
      const Eigen::Index s = layout.s_offset + ri;
      row(s) = cc.g;
      qp.lb(w) = range.lo;
      qp.ub(w) = range.hi;
      // s >= m (1 - w) + c_q  <=>  -s - m w <= -(m + c_q)
      for (const auto& seg : q.segments) {
        Eigen::RowVectorXd pr = Eigen::RowVectorXd::Zero(nx);
        pr(s) = -1.0;
        pr(w) = -seg.slope;
        append_row(rows, std::move(pr), -(seg.slope + seg.intercept));
      }
      auto& budget = budgets[cc.group];
      if (budget.size() == 0) budget = Eigen::RowVectorXd::Zero(nx);
      budget(w) = 1.0;
    }
    append_row(rows, std::move(row), rhs);
  }
  for (auto& [group, row] : budgets) append_row(rows, row, group_alpha(scn, group));

  qp.G.resize(static_cast<Eigen::Index>(rows.size()), nx);
  qp.g.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    qp.G.row(static_cast<Eigen::Index>(k)) = rows[k].first;
    qp.g(static_cast<Eigen::Index>(k)) = rows[k].second;
  }
  return qp;
}

VectorXd initialize(const Scenario& scn, const std::vector<CompiledConstraint>& cat,
                    const PwaMap& pwa, const QpBackend& backend, const SolverOptions& options,
                    double* relaxation_cost) {
  const auto relaxed = convex_only(cat);
  const DecisionLayout layout = DecisionLayout::build(scn.decision_size(), relaxed);
  const QpProblem qp = build_iterate_qp(scn, relaxed, pwa, layout,
                                        VectorXd::Zero(layout.u_size), 0.0, options);
  const QpResult res = backend.solve(qp);
  if (res.status != QpStatus::kOptimal) {
    throw SolveError(SolveError::Stage::kRelaxation, res.status, 0,
                     std::string("relaxation without separation constraints is ") +
                         to_string(res.status) + ": " + res.message);
  }
  const VectorXd U = res.x.head(layout.u_size);
  if (relaxation_cost) *relaxation_cost = U.squaredNorm();
  return U;
}

Solution convex_concave_solve(const Scenario& scn, const std::vector<CompiledConstraint>& cat,
                              const PwaMap& pwa, const QpBackend& backend,
                              const SolverOptions& options) {
  if (cat.empty()) throw std::invalid_argument("convex_concave_solve: empty constraint catalog");
  double relaxation_cost = 0.0;
  VectorXd U_ref = initialize(scn, cat, pwa, backend, options, &relaxation_cost);
  const DecisionLayout layout = DecisionLayout::build(scn.decision_size(), cat);

  Solution best;
  bool have_best = false;
  std::vector<TraceEntry> trace;
  double tau = options.tau0;
  double prev_cost = relaxation_cost;
  VectorXd prev_x;

  int it = 1;
  bool converged = false;
  for (; it <= options.max_iterations; ++it) {
    const QpProblem qp = build_iterate_qp(scn, cat, pwa, layout, U_ref, tau, options);
    const QpResult res = backend.solve(qp);
    if (res.status != QpStatus::kOptimal) {
      std::ostringstream os;
      os << "subproblem at iteration " << it << " (" << qp.size() << " variables, "
         << qp.G.rows() << " rows, tau " << tau << ") is " << to_string(res.status) << ": "
         << res.message;
      throw SolveError(SolveError::Stage::kIteration, res.status, it, os.str());
    }
    Solution sol = unpack(scn, layout, cat, res.x);
    TraceEntry entry;
    entry.iteration = it;
    entry.tau = tau;
    entry.cost = sol.cost;
    entry.slack_sum = sol.slack_sum();
    entry.penalized = res.objective;
    entry.previous_penalized =
        prev_x.size() ? qp.objective(prev_x) : std::numeric_limits<double>::quiet_NaN();
    trace.push_back(entry);

    const bool feasible = entry.slack_sum < options.tolerance;
    if (!have_best || (feasible && (best.slack_sum() >= options.tolerance || sol.cost <= best.cost)) ||
        (!feasible && best.slack_sum() >= options.tolerance && sol.slack_sum() < best.slack_sum())) {
      best = sol;
      best.iterations = it;
      have_best = true;
    }
    if (std::abs(sol.cost - prev_cost) < options.tolerance && feasible) {
      best = sol;
      converged = true;
      break;
    }
    prev_cost = sol.cost;
    prev_x = res.x;
    U_ref = sol.U;
    tau = std::min(tau * options.tau_growth, options.tau_max);
  }
  best.iterations = converged ? it : options.max_iterations;
  best.converged = converged;
  best.relaxation_cost = relaxation_cost;
  best.trace = std::move(trace);
  return best;
}

CertificationReport certify(const Scenario& scn, const Solution& solution,
                            const std::vector<CompiledConstraint>& cat, const PwaMap& pwa,
                            double tolerance) {
  CertificationReport rep;
  rep.tolerance = tolerance;
  const auto count = static_cast<Eigen::Index>(cat.size());
  if (solution.U.size() != scn.decision_size() || solution.risk.size() != count) {
    rep.issues.push_back("solution dimensions do not match the scenario and catalog");
    rep.max_violation = kInf;
    return rep;
  }
  auto note = [&](double violation) { rep.max_violation = std::max(rep.max_violation, violation); };

  const Eigen::Index m = scn.system.m();
  for (Eigen::Index j = 0; j < solution.U.size(); ++j) {
    const double v = std::max(scn.u_lo(j % m) - solution.U(j), solution.U(j) - scn.u_hi(j % m));
    if (v > tolerance) rep.issues.push_back("input " + std::to_string(j) + " outside its bounds");
    note(v);
  }

  for (Eigen::Index i = 0; i < count; ++i) {
    const CompiledConstraint& cc = cat[static_cast<std::size_t>(i)];
    ConstraintCheck check;
    check.label = cc.label();
    if (!cc.deterministic()) {
      check.risk = solution.risk(i);
      if (check.risk < 0.0) {
        rep.issues.push_back(check.label + ": negative risk");
        note(-check.risk);
      }
      switch (cc.group) {
        case RiskGroup::kTerminal: rep.terminal_risk += check.risk; break;
        case RiskGroup::kAvoidance: rep.avoidance_risk += check.risk; break;
        case RiskGroup::kObstacle: rep.obstacle_risk += check.risk; break;
      }
      try {
        check.tightening = cc.g * pwa_for(pwa, cc).eval(1.0 - check.risk);
      } catch (const std::out_of_range&) {
        rep.issues.push_back(check.label + ": 1 - risk lies outside the quantile envelope");
        check.tightening = kInf;
      }
    }
    const double f = cc.f(solution.U);
    check.violation = cc.kind == ConstraintKind::kConvexUpper ? f + check.tightening - cc.c
                                                              : cc.c + check.tightening - f;
    if (check.violation > tolerance) rep.issues.push_back(check.label + ": violated");
    note(check.violation);
    rep.checks.push_back(std::move(check));
  }

  const std::pair<double, double> budgets[] = {{rep.terminal_risk, scn.alpha_terminal},
                                               {rep.avoidance_risk, scn.alpha_avoid},
                                               {rep.obstacle_risk, scn.alpha_obstacle}};
  const char* names[] = {"terminal", "avoidance", "obstacle"};
  for (int g = 0; g < 3; ++g) {
    const double over = budgets[g].first - budgets[g].second;
    if (over > tolerance) rep.issues.push_back(std::string(names[g]) + " risk budget exceeded");
    note(over);
  }
  rep.passed = rep.issues.empty() && rep.max_violation <= tolerance;
  return rep;
}

}  // namespace ccplan
