#include "ccplan/records.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace ccplan {
namespace {

using nlohmann::json;

json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double num(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw std::invalid_argument("record: expected a number, got " + j.dump());
}

json vec(const VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(num(v(i)));
  return out;
}

VectorXd vec(const json& j) {
  VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = num(j[i]);
  return v;
}

json opt(const std::optional<double>& v) { return v ? num(*v) : json(nullptr); }

void expect_format(const json& j, const char* format) {
  if (!j.is_object() || j.value("format", "") != format) {
    throw std::invalid_argument(std::string("record is not a '") + format + "' document");
  }
}

}  // namespace

json to_json(const PwaQuantile& pwa) {
  json segs = json::array();
  for (const auto& s : pwa.segments) segs.push_back({num(s.slope), num(s.intercept)});
  json j = {{"format", "ccplan.pwa"},
            {"version", 1},
            {"distribution", pwa.dist_name},
            {"p_lo", num(pwa.p_lo)},
            {"p_hi", num(pwa.p_hi)},
            {"xi", num(pwa.xi)},
            {"certified_error", num(pwa.certified_error)},
            {"segments", segs}};
  if (pwa.source) {
    j["h"] = num(pwa.source->h);
    j["n_d"] = pwa.source->n_d;
    j["table_points"] = pwa.source->size();
  }
  return j;
}

PwaQuantile pwa_from_json(const json& j) {
  expect_format(j, "ccplan.pwa");
  PwaQuantile pwa;
  pwa.dist_name = j.at("distribution").get<std::string>();
  pwa.p_lo = num(j.at("p_lo"));
  pwa.p_hi = num(j.at("p_hi"));
  pwa.xi = num(j.at("xi"));
  pwa.certified_error = num(j.at("certified_error"));
  for (const auto& s : j.at("segments")) {
    pwa.segments.push_back(AffineSegment{num(s.at(0)), num(s.at(1))});
  }
  if (pwa.segments.empty() || !(pwa.p_lo <= pwa.p_hi)) {
    throw std::invalid_argument("pwa record: needs segments and p_lo <= p_hi");
  }
  return pwa;
}

json to_json(const Solution& sol, const std::vector<CompiledConstraint>& cat,
             const std::string& scenario_name) {
  json vehicles = json::array();
  for (const auto& u : sol.inputs) vehicles.push_back({{"inputs", vec(u)}});
  json constraints = json::array();
  for (std::size_t i = 0; i < cat.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    constraints.push_back({{"label", cat[i].label()},
                           {"kind", to_string(cat[i].kind)},
                           {"g", num(cat[i].g)},
                           {"distribution", cat[i].dist ? cat[i].dist->name() : ""},
                           {"risk", num(sol.risk(k))},
                           {"s", num(sol.s(k))},
                           {"t", num(sol.t(k))}});
  }
  json trace = json::array();
  for (const auto& t : sol.trace) {
    trace.push_back({{"iteration", t.iteration},
                     {"tau", num(t.tau)},
                     {"cost", num(t.cost)},
                     {"slack_sum", num(t.slack_sum)},
                     {"penalized", num(t.penalized)},
                     {"previous_penalized", num(t.previous_penalized)}});
  }
  return {{"format", "ccplan.solution"},
          {"version", 1},
          {"scenario", scenario_name},
          {"converged", sol.converged},
          {"iterations", sol.iterations},
          {"cost", num(sol.cost)},
          {"relaxation_cost", num(sol.relaxation_cost)},
          {"slack_sum", num(sol.slack_sum())},
          {"vehicles", vehicles},
          {"constraints", constraints},
          {"trace", trace}};
}

Solution solution_from_json(const json& j) {
  expect_format(j, "ccplan.solution");
  Solution sol;
  sol.converged = j.at("converged").get<bool>();
  sol.iterations = j.at("iterations").get<int>();
  sol.cost = num(j.at("cost"));
  sol.relaxation_cost = num(j.at("relaxation_cost"));
  Eigen::Index total = 0;
  for (const auto& v : j.at("vehicles")) {
    sol.inputs.push_back(vec(v.at("inputs")));
    total += sol.inputs.back().size();
  }
  sol.U.resize(total);
  Eigen::Index off = 0;
  for (const auto& u : sol.inputs) {
    sol.U.segment(off, u.size()) = u;
    off += u.size();
  }
  const auto& cons = j.at("constraints");
  const auto count = static_cast<Eigen::Index>(cons.size());
  sol.risk.resize(count);
  sol.s.resize(count);
  sol.t.resize(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    const auto& c = cons[static_cast<std::size_t>(i)];
    sol.risk(i) = num(c.at("risk"));
    sol.s(i) = num(c.at("s"));
    sol.t(i) = num(c.at("t"));
  }
  for (const auto& t : j.at("trace")) {
    sol.trace.push_back(TraceEntry{t.at("iteration").get<int>(), num(t.at("tau")),
                                   num(t.at("cost")), num(t.at("slack_sum")),
                                   num(t.at("penalized")), num(t.at("previous_penalized"))});
  }
  return sol;
}

json to_json(const CertificationReport& rep) {
  json checks = json::array();
  for (const auto& c : rep.checks) {
    checks.push_back({{"label", c.label},
                      {"risk", num(c.risk)},
                      {"tightening", num(c.tightening)},
                      {"violation", num(c.violation)}});
  }
  return {{"format", "ccplan.certification"},
          {"version", 1},
          {"passed", rep.passed},
          {"tolerance", num(rep.tolerance)},
          {"max_violation", num(rep.max_violation)},
          {"risk_used",
           {{"terminal", num(rep.terminal_risk)},
            {"avoidance", num(rep.avoidance_risk)},
            {"obstacle", num(rep.obstacle_risk)}}},
          {"issues", rep.issues},
          {"checks", checks}};
}

json to_json(const McReport& rep) {
  json traces = json::array();
  for (const auto& t : rep.traces) {
    json d = json::array();
    for (double v : t.distance) d.push_back(num(v));
    traces.push_back({{"pair", {t.i, t.j}}, {"distance_m", d}});
  }
  return {{"format", "ccplan.montecarlo"},
          {"version", 1},
          {"samples", rep.samples},
          {"seed", rep.seed},
          {"terminal_satisfaction", opt(rep.terminal_satisfaction)},
          {"avoidance_satisfaction", opt(rep.avoidance_satisfaction)},
          {"obstacle_satisfaction", opt(rep.obstacle_satisfaction)},
          {"trace_statistic", rep.trace_statistic},
          {"traces", traces}};
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("error while writing '" + path + "'");
}

}  // namespace ccplan
