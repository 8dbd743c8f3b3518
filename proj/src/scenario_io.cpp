#include "ccplan/scenario_io.hpp"

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

namespace ccplan {
namespace {

struct Entry {
  std::string value;
  int line;
};

struct Section {
  std::string name;
  int line;
  std::multimap<std::string, Entry> entries;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class Reader {
 public:
  Reader(const Section& sec, std::string source) : sec_(sec), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& key, int line, const std::string& msg) const {
    throw ScenarioParseError(source_, line, "[" + sec_.name + "] " + key, msg);
  }

  bool has(const std::string& key) const { return sec_.entries.count(key) > 0; }

  const Entry& entry(const std::string& key) const {
    const auto n = sec_.entries.count(key);
    if (n == 0) fail(key, sec_.line, "missing required field");
    auto it = sec_.entries.find(key);
    if (n > 1) fail(key, std::next(it)->second.line, "field given more than once");
    return it->second;
  }

  std::vector<double> numbers(const std::string& key, const Entry& e) const {
    std::istringstream is(e.value);
    std::vector<double> out;
    std::string tok;
    while (is >> tok) {
      try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        out.push_back(v);
      } catch (const std::exception&) {
        fail(key, e.line, "'" + tok + "' is not a number");
      }
    }
    return out;
  }

  double number(const std::string& key) const {
    const Entry& e = entry(key);
    const auto v = numbers(key, e);
    if (v.size() != 1) fail(key, e.line, "expected one number");
    return v[0];
  }

  double number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  int integer(const std::string& key) const {
    const double v = number(key);
    if (v != static_cast<int>(v)) fail(key, entry(key).line, "expected an integer");
    return static_cast<int>(v);
  }

  std::string text(const std::string& key) const { return entry(key).value; }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = text(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail(key, entry(key).line, "expected true or false");
  }

  VectorXd vector(const std::string& key, std::optional<Eigen::Index> size = {}) const {
    const Entry& e = entry(key);
    const auto v = numbers(key, e);
    if (v.empty()) fail(key, e.line, "expected at least one number");
    if (size && static_cast<Eigen::Index>(v.size()) != *size) {
      fail(key, e.line, "expected " + std::to_string(*size) + " numbers, got " +
                            std::to_string(v.size()));
    }
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  MatrixXd matrix(const std::string& key, Eigen::Index rows, Eigen::Index cols) const {
    const Entry& e = entry(key);
    std::vector<std::vector<double>> parsed;
    std::istringstream is(e.value);
    std::string row;
    while (std::getline(is, row, ';')) parsed.push_back(numbers(key, Entry{row, e.line}));
    if (rows >= 0 && static_cast<Eigen::Index>(parsed.size()) != rows) {
      fail(key, e.line, "expected " + std::to_string(rows) + " rows, got " +
                            std::to_string(parsed.size()));
    }
    MatrixXd M(static_cast<Eigen::Index>(parsed.size()), cols);
    for (std::size_t r = 0; r < parsed.size(); ++r) {
      if (static_cast<Eigen::Index>(parsed[r].size()) != cols) {
        fail(key, e.line, "row " + std::to_string(r) + " has " + std::to_string(parsed[r].size()) +
                              " entries, expected " + std::to_string(cols));
      }
      for (std::size_t c = 0; c < parsed[r].size(); ++c) {
        M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = parsed[r][c];
      }
    }
    return M;
  }

  void reject_unknown(std::initializer_list<const char*> known) const {
    for (const auto& [key, e] : sec_.entries) {
      bool ok = false;
      for (const char* k : known) ok = ok || key == k;
      if (!ok) fail(key, e.line, "unknown field");
    }
  }

  int line() const { return sec_.line; }

 private:
  const Section& sec_;
  std::string source_;
};

std::vector<Section> split_sections(const std::string& text, const std::string& source) {
  std::vector<Section> sections;
  std::istringstream is(text);
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ScenarioParseError(source, line, s, "unterminated section header");
      sections.push_back(Section{trim(s.substr(1, s.size() - 2)), line, {}});
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ScenarioParseError(source, line, s, "expected 'key = value'");
    }
    if (sections.empty()) {
      throw ScenarioParseError(source, line, trim(s.substr(0, eq)), "field outside any section");
    }
    sections.back().entries.emplace(trim(s.substr(0, eq)), Entry{trim(s.substr(eq + 1)), line});
  }
  return sections;
}

const Section& single(const std::vector<Section>& sections, const std::string& name,
                      const std::string& source) {
  const Section* found = nullptr;
  for (const auto& s : sections) {
    if (s.name != name) continue;
    if (found) throw ScenarioParseError(source, s.line, "[" + name + "]", "section given twice");
    found = &s;
  }
  if (!found) throw ScenarioParseError(source, 0, "[" + name + "]", "missing section");
  return *found;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string fmt(const VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? " " : "") + fmt(v(i));
  return out;
}

std::string fmt(const MatrixXd& M) {
  std::string out;
  for (Eigen::Index r = 0; r < M.rows(); ++r) out += (r ? "; " : "") + fmt(VectorXd(M.row(r).transpose()));
  return out;
}

bool is_box(const Polytope& poly) {
  const Eigen::Index n = poly.P.cols();
  if (poly.P.rows() != 2 * n) return false;
  Polytope ref = Polytope::box(VectorXd::Zero(n), VectorXd::Zero(n));
  if (poly.P != ref.P) return false;
  for (Eigen::Index d = 0; d < n; ++d) {
    if (!(-poly.p(2 * d + 1) <= poly.p(2 * d))) return false;
  }
  return true;
}

}  // namespace

ScenarioParseError::ScenarioParseError(std::string source, int line, std::string field,
                                       const std::string& msg)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + field + ": " + msg),
      source_(std::move(source)),
      line_(line),
      field_(std::move(field)) {}

Scenario parse_scenario(const std::string& text, const std::string& source) {
  const auto sections = split_sections(text, source);
  for (const auto& s : sections) {
    if (s.name != "system" && s.name != "inputs" && s.name != "disturbance" &&
        s.name != "constraints" && s.name != "vehicle" && s.name != "obstacle") {
      throw ScenarioParseError(source, s.line, "[" + s.name + "]", "unknown section");
    }
  }
  Scenario scn;

  const Reader sys(single(sections, "system", source), source);
  sys.reject_unknown({"name", "model", "dt", "horizon", "mass", "mu", "radius", "planar", "A", "B"});
  scn.name = sys.has("name") ? sys.text("name") : "scenario";
  const std::string model = sys.has("model") ? sys.text("model") : "cwh";
  const double dt = sys.number("dt");
  if (!(dt > 0.0)) sys.fail("dt", sys.entry("dt").line, "must be positive");
  scn.horizon = sys.integer("horizon");
  if (scn.horizon < 1) sys.fail("horizon", sys.entry("horizon").line, "must be at least 1");
  if (model == "cwh") {
    CwhParams p;
    p.mass = sys.number_or("mass", p.mass);
    p.mu = sys.number_or("mu", p.mu);
    p.radius = sys.number_or("radius", p.radius);
    p.planar = sys.flag("planar", false);
    if (!(p.mass > 0 && p.mu > 0 && p.radius > 0)) {
      sys.fail("mass/mu/radius", sys.line(), "must be positive");
    }
    scn.cwh = p;
    scn.system = cwh_discretize(p, dt);
  } else if (model == "matrix") {
    const auto a_rows = [&] {
      std::istringstream is(sys.text("A"));
      std::string row;
      Eigen::Index n = 0;
      while (std::getline(is, row, ';')) ++n;
      return n;
    }();
    scn.system.A = sys.matrix("A", a_rows, a_rows);
    const Eigen::Index m = [&] {
      std::istringstream is(sys.text("B"));
      std::string row;
      std::getline(is, row, ';');
      return static_cast<Eigen::Index>(sys.numbers("B", Entry{row, sys.entry("B").line}).size());
    }();
    scn.system.B = sys.matrix("B", a_rows, m);
    scn.system.dt = dt;
  } else {
    sys.fail("model", sys.entry("model").line, "expected 'cwh' or 'matrix'");
  }
  const Eigen::Index n = scn.system.n();
  const Eigen::Index m = scn.system.m();

  const Reader in(single(sections, "inputs", source), source);
  in.reject_unknown({"lower", "upper"});
  scn.u_lo = in.vector("lower", m);
  scn.u_hi = in.vector("upper", m);

  const Reader dist(single(sections, "disturbance", source), source);
  dist.reject_unknown({"type", "sigma", "sigma_diag", "gamma"});
  const std::string type = dist.text("type");
  if (type == "gaussian") {
    scn.disturbance.kind = DisturbanceKind::kGaussian;
    if (dist.has("sigma") == dist.has("sigma_diag")) {
      dist.fail("sigma", dist.line(), "give exactly one of sigma or sigma_diag");
    }
    if (dist.has("sigma")) {
      scn.disturbance.sigma = dist.matrix("sigma", n, n);
    } else {
      scn.disturbance.sigma = dist.vector("sigma_diag", n).asDiagonal();
    }
  } else if (type == "cauchy") {
    scn.disturbance.kind = DisturbanceKind::kCauchy;
    scn.disturbance.gamma = dist.vector("gamma", n);
  } else {
    dist.fail("type", dist.entry("type").line, "expected 'gaussian' or 'cauchy'");
  }

  const Reader con(single(sections, "constraints", source), source);
  con.reject_unknown({"separation", "alpha_terminal", "alpha_avoid", "alpha_obstacle",
                      "position_rows", "position_matrix"});
  scn.r = con.number("separation");
  scn.alpha_terminal = con.number("alpha_terminal");
  scn.alpha_avoid = con.number("alpha_avoid");
  scn.alpha_obstacle = con.number_or("alpha_obstacle", scn.alpha_obstacle);
  if (con.has("position_matrix")) {
    const std::string txt = con.text("position_matrix");
    const auto rows = static_cast<Eigen::Index>(std::count(txt.begin(), txt.end(), ';') + 1);
    scn.S = con.matrix("position_matrix", rows, n);
  } else {
    std::vector<double> idx;
    if (con.has("position_rows")) {
      idx = con.numbers("position_rows", con.entry("position_rows"));
    } else {
      const Eigen::Index axes = scn.cwh ? n / 2 : n;
      for (Eigen::Index i = 0; i < axes; ++i) idx.push_back(static_cast<double>(i));
    }
    scn.S = MatrixXd::Zero(static_cast<Eigen::Index>(idx.size()), n);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto c = static_cast<Eigen::Index>(idx[r]);
      if (c < 0 || c >= n || static_cast<double>(c) != idx[r]) {
        con.fail("position_rows", con.entry("position_rows").line, "state index out of range");
      }
      scn.S(static_cast<Eigen::Index>(r), c) = 1.0;
    }
  }

  for (const auto& s : sections) {
    if (s.name == "vehicle") {
      const Reader veh(s, source);
      veh.reject_unknown({"x0", "target_lower", "target_upper", "target_center",
                          "target_half_width", "face"});
      Vehicle v;
      v.x0 = veh.vector("x0", n);
      if (veh.has("face")) {
        const auto range = s.entries.equal_range("face");
        std::vector<std::vector<double>> faces;
        for (auto it = range.first; it != range.second; ++it) {
          auto row = veh.numbers("face", it->second);
          if (static_cast<Eigen::Index>(row.size()) != n + 1) {
            veh.fail("face", it->second.line, "expected " + std::to_string(n) +
                                                  " normal entries and a bound");
          }
          faces.push_back(std::move(row));
        }
        v.target.P.resize(static_cast<Eigen::Index>(faces.size()), n);
        v.target.p.resize(static_cast<Eigen::Index>(faces.size()));
        for (std::size_t f = 0; f < faces.size(); ++f) {
          for (Eigen::Index d = 0; d < n; ++d) {
            v.target.P(static_cast<Eigen::Index>(f), d) = faces[f][static_cast<std::size_t>(d)];
          }
          v.target.p(static_cast<Eigen::Index>(f)) = faces[f].back();
        }
      } else if (veh.has("target_lower")) {
        const VectorXd lo = veh.vector("target_lower", n);
        const VectorXd hi = veh.vector("target_upper", n);
        if (!(lo.array() <= hi.array()).all()) {
          veh.fail("target_lower", veh.entry("target_lower").line, "exceeds target_upper");
        }
        v.target = Polytope::box(lo, hi);
      } else {
        const VectorXd c = veh.vector("target_center", n);
        const VectorXd hw = veh.vector("target_half_width", n);
        if ((hw.array() < 0.0).any()) {
          veh.fail("target_half_width", veh.entry("target_half_width").line, "must be >= 0");
        }
        v.target = Polytope::box(c - hw, c + hw);
      }
      scn.vehicles.push_back(std::move(v));
    } else if (s.name == "obstacle") {
      const Reader obs(s, source);
      obs.reject_unknown({"center", "radius"});
      scn.obstacles.push_back(StaticObstacle{obs.vector("center", scn.S.rows()), obs.number("radius")});
    }
  }
  if (scn.vehicles.empty()) throw ScenarioParseError(source, 0, "[vehicle]", "no vehicles defined");

  try {
    scn.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioParseError(source, 0, "scenario", e.what());
  }
  return scn;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

std::string serialize_scenario(const Scenario& scn) {
  std::ostringstream os;
  os << "[system]\nname = " << scn.name << "\n";
  if (scn.cwh) {
    os << "model = cwh\nmass = " << fmt(scn.cwh->mass) << "\nmu = " << fmt(scn.cwh->mu)
       << "\nradius = " << fmt(scn.cwh->radius) << "\nplanar = " << (scn.cwh->planar ? "true" : "false")
       << "\n";
  } else {
    os << "model = matrix\nA = " << fmt(scn.system.A) << "\nB = " << fmt(scn.system.B) << "\n";
  }
  os << "dt = " << fmt(scn.system.dt) << "\nhorizon = " << scn.horizon << "\n\n";
  os << "[inputs]\nlower = " << fmt(scn.u_lo) << "\nupper = " << fmt(scn.u_hi) << "\n\n";
  os << "[disturbance]\n";
  if (scn.disturbance.kind == DisturbanceKind::kGaussian) {
    os << "type = gaussian\nsigma = " << fmt(scn.disturbance.sigma) << "\n\n";
  } else {
    os << "type = cauchy\ngamma = " << fmt(scn.disturbance.gamma) << "\n\n";
  }
  os << "[constraints]\nseparation = " << fmt(scn.r) << "\nalpha_terminal = " << fmt(scn.alpha_terminal)
     << "\nalpha_avoid = " << fmt(scn.alpha_avoid) << "\nalpha_obstacle = " << fmt(scn.alpha_obstacle)
     << "\nposition_matrix = " << fmt(scn.S) << "\n";
  for (const auto& v : scn.vehicles) {
    os << "\n[vehicle]\nx0 = " << fmt(v.x0) << "\n";
    if (is_box(v.target)) {
      const Eigen::Index n = v.target.P.cols();
      VectorXd lo(n), hi(n);
      for (Eigen::Index d = 0; d < n; ++d) {
        hi(d) = v.target.p(2 * d);
        lo(d) = -v.target.p(2 * d + 1);
      }
      os << "target_lower = " << fmt(lo) << "\ntarget_upper = " << fmt(hi) << "\n";
    } else {
      for (Eigen::Index f = 0; f < v.target.faces(); ++f) {
        os << "face = " << fmt(VectorXd(v.target.P.row(f).transpose())) << " " << fmt(v.target.p(f)) << "\n";
      }
    }
  }
  for (const auto& o : scn.obstacles) {
    os << "\n[obstacle]\ncenter = " << fmt(o.center) << "\nradius = " << fmt(o.radius) << "\n";
  }
  return os.str();
}

}  // namespace ccplan
