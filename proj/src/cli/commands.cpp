#include "ccplan/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ccplan/montecarlo.hpp"
#include "ccplan/records.hpp"
#include "ccplan/scenario_io.hpp"
#include "ccplan/solver.hpp"

namespace ccplan::cli {
namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double parse_positive(const std::string& text, const char* what) {
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw UsageError(std::string(what) + ": '" + text + "' is not a number");
  }
  if (!(v > 0.0)) throw UsageError(std::string(what) + " must be positive");
  return v;
}

fs::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  try {
    write_json_file(path.string(), j);
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  }
}

std::ofstream open_table(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << std::setprecision(12);
  return out;
}

struct QuantileArgs {
  std::string dist;
  std::string h = "5e-6";
  std::string xi = "0.1";
  int n_d = 3;
  double p_lo = -1.0;
  double p_hi = 1.0 - 1e-4;
  bool analytic = false;
  std::string out_file;
};

struct SolveArgs {
  std::string scenario;
  std::string out_dir = ".";
  std::string h = "5e-6";
  std::string xi = "0.1";
  int n_d = 3;
  bool analytic = false;
  SolverOptions solver;
  McOptions mc;
  std::string pwa_cache;
};

struct ValidateArgs {
  std::string scenario;
  std::string solution;
  std::string out_dir = ".";
  McOptions mc;
};

int cmd_quantile(const QuantileArgs& a, std::ostream& out) {
  DistributionPtr dist;
  try {
    dist = shared_distribution(a.dist);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const double h = parse_positive(a.h, "--step");
  const double xi = parse_positive(a.xi, "--xi");
  const double p_lo = a.p_lo < 0.0 ? dist->anchor().p : a.p_lo;
  if (!(p_lo >= dist->anchor().p && p_lo < a.p_hi && a.p_hi < 1.0)) {
    throw UsageError("need anchor p0 <= p_lo < p_hi < 1 (anchor p0 = " +
                     std::to_string(dist->anchor().p) + ")");
  }
  QuantileTable table;
  if (a.analytic) {
    if (!dist->has_analytic_quantile()) {
      throw UsageError("distribution '" + a.dist + "' has no analytic quantile");
    }
    table = analytic_table(*dist, p_lo, h, a.p_hi);
  } else {
    table = restrict_range(
        taylor_walk(*dist, dist->anchor().p, dist->anchor().q, h, a.p_hi, a.n_d), p_lo, a.p_hi);
  }
  const PwaQuantile pwa = pwa_reduce(table, xi);
  const std::string path = a.out_file.empty() ? "pwa_" + a.dist + ".json" : a.out_file;
  write_json(path, to_json(pwa));
  out << "distribution " << a.dist << ": " << pwa.segments.size() << " segments on ["
      << pwa.p_lo << ", " << pwa.p_hi << "], certified max over-approximation "
      << std::setprecision(6) << pwa.certified_error << " (budget " << xi << ")\n"
      << "wrote " << path << "\n";
  return kOk;
}

PwaMap pwa_with_cache(const Scenario& scn, const std::vector<CompiledConstraint>& cat,
                      const PwaBuildOptions& opts, const std::string& cache_dir,
                      std::ostream& out) {
  if (cache_dir.empty()) return build_pwa_map(scn, cat, opts);
  const fs::path dir = ensure_dir(cache_dir);
  PwaMap fresh;
  PwaMap result;
  std::map<std::string, double> needed_lo;
  for (const auto& cc : cat) {
    if (cc.deterministic()) continue;
    const double alpha = cc.group == RiskGroup::kTerminal    ? scn.alpha_terminal
                         : cc.group == RiskGroup::kAvoidance ? scn.alpha_avoid
                                                             : scn.alpha_obstacle;
    const double lo = std::max(cc.dist->anchor().p, 1.0 - alpha);
    auto it = needed_lo.find(cc.dist->name());
    if (it == needed_lo.end()) needed_lo.emplace(cc.dist->name(), lo);
    else it->second = std::min(it->second, lo);
  }
  for (const auto& [name, lo] : needed_lo) {
    std::ostringstream tag;
    tag << "pwa_" << name << (opts.analytic ? "_analytic" : "_walk") << "_h" << opts.h << "_xi"
        << opts.xi << "_nd" << opts.n_d << ".json";
    const fs::path path = dir / tag.str();
    if (fs::exists(path)) {
      try {
        PwaQuantile cached = pwa_from_json(read_json_file(path.string()));
        if (cached.p_lo <= lo + opts.h && cached.p_hi >= opts.p_max - 1e-12) {
          out << "loaded cached quantile envelope " << path.string() << "\n";
          result.emplace(name, std::move(cached));
          continue;
        }
      } catch (const std::exception& e) {
        out << "ignoring unreadable cache " << path.string() << ": " << e.what() << "\n";
      }
    }
    if (fresh.empty()) fresh = build_pwa_map(scn, cat, opts);
    result.emplace(name, fresh.at(name));
    write_json(path, to_json(fresh.at(name)));
  }
  return result;
}

void write_trajectories(const fs::path& path, const Scenario& scn,
                        const std::vector<std::vector<VectorXd>>& nominal) {
  auto out = open_table(path);
  static const char* axes[] = {"x_m", "y_m", "z_m"};
  out << "vehicle,step,time_s";
  for (Eigen::Index r = 0; r < scn.S.rows(); ++r) {
    out << "," << (r < 3 ? axes[r] : ("p" + std::to_string(r) + "_m"));
  }
  out << "\n";
  for (std::size_t v = 0; v < nominal.size(); ++v) {
    for (int k = 0; k <= scn.horizon; ++k) {
      const VectorXd x = k == 0 ? scn.vehicles[v].x0 : nominal[v][static_cast<std::size_t>(k - 1)];
      const VectorXd p = scn.S * x;
      out << v << "," << k << "," << k * scn.system.dt;
      for (Eigen::Index r = 0; r < p.size(); ++r) out << "," << p(r);
      out << "\n";
    }
  }
}

void write_distances(const fs::path& path, const Scenario& scn,
                     const std::vector<std::vector<VectorXd>>& nominal, const McReport& mc) {
  auto out = open_table(path);
  const bool sampled = !mc.traces.empty();
  out << "vehicle_i,vehicle_j,step,time_s,nominal_distance_m";
  if (sampled) out << "," << mc.trace_statistic << "_distance_m";
  out << ",separation_m\n";
  std::size_t p = 0;
  for (std::size_t i = 0; i < nominal.size(); ++i) {
    for (std::size_t j = i + 1; j < nominal.size(); ++j, ++p) {
      for (int k = 1; k <= scn.horizon; ++k) {
        const auto ks = static_cast<std::size_t>(k - 1);
        out << i << "," << j << "," << k << "," << k * scn.system.dt << ","
            << (scn.S * (nominal[i][ks] - nominal[j][ks])).norm();
        if (sampled) out << "," << mc.traces[p].distance[ks];
        out << "," << scn.r << "\n";
      }
    }
  }
}

bool mc_meets_targets(const Scenario& scn, const McReport& mc) {
  if (mc.samples == 0) return true;
  bool ok = *mc.terminal_satisfaction >= 1.0 - scn.alpha_terminal;
  if (scn.vehicles.size() > 1) ok = ok && *mc.avoidance_satisfaction >= 1.0 - scn.alpha_avoid;
  if (mc.obstacle_satisfaction) ok = ok && *mc.obstacle_satisfaction >= 1.0 - scn.alpha_obstacle;
  return ok;
}

void print_mc(const McReport& mc, std::ostream& out) {
  if (mc.samples == 0) {
    out << "Monte Carlo skipped (0 samples)\n";
    return;
  }
  out << "Monte Carlo (" << mc.samples << " samples, seed " << mc.seed
      << "): terminal " << std::setprecision(6) << *mc.terminal_satisfaction << ", avoidance "
      << *mc.avoidance_satisfaction;
  if (mc.obstacle_satisfaction) out << ", obstacles " << *mc.obstacle_satisfaction;
  out << "\n";
}

Scenario read_scenario(const std::string& path) {
  if (!fs::exists(path)) throw IoError("scenario file '" + path + "' not found");
  return load_scenario(path);
}

int cmd_solve(const SolveArgs& a, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const Scenario scn = read_scenario(a.scenario);
  const fs::path dir = ensure_dir(a.out_dir);
  const auto cat = catalog(scn);

  PwaBuildOptions popts;
  popts.h = parse_positive(a.h, "--step");
  popts.xi = parse_positive(a.xi, "--xi");
  popts.n_d = a.n_d;
  popts.analytic = a.analytic;
  const PwaMap pwa = pwa_with_cache(scn, cat, popts, a.pwa_cache, out);
  for (const auto& [name, q] : pwa) {
    out << "quantile " << name << ": " << q.segments.size() << " segments on [" << q.p_lo
        << ", " << q.p_hi << "], certified error " << q.certified_error << "\n";
  }

  const InteriorPointQp backend;
  Solution sol;
  try {
    sol = convex_concave_solve(scn, cat, pwa, backend, a.solver);
  } catch (const SolveError& e) {
    if (e.stage == SolveError::Stage::kRelaxation && e.status == QpStatus::kInfeasible) {
      out << "error: targets are unreachable under the input bounds: " << e.what() << "\n";
      return kInfeasibleRelaxation;
    }
    out << "error: " << e.what() << "\n";
    return kQpFailure;
  }
  write_json(dir / "solution.json", to_json(sol, cat, scn.name));
  out << std::setprecision(10) << "cost J = " << sol.cost << " after " << sol.iterations
      << " iterations (" << (sol.converged ? "converged" : "NOT converged")
      << "), slack sum " << sol.slack_sum() << "\n";

  const CertificationReport cert = certify(scn, sol, cat, pwa);
  write_json(dir / "certification.json", to_json(cert));
  out << "certification " << (cert.passed ? "passed" : "FAILED") << ", max violation "
      << cert.max_violation << "\n";

  const McReport mc = evaluate(scn, sol.inputs, a.mc);
  write_json(dir / "montecarlo.json", to_json(mc));
  print_mc(mc, out);

  const auto nominal = nominal_trajectories(scn, sol.inputs);
  write_trajectories(dir / "trajectories.csv", scn, nominal);
  write_distances(dir / "distances.csv", scn, nominal, mc);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out << "outputs in " << dir.string() << " (" << std::setprecision(3) << secs << " s)\n";

  if (!sol.converged) return kNotConverged;
  if (!cert.passed) return kCertificationFailed;
  if (!mc_meets_targets(scn, mc)) return kMonteCarloBelowTarget;
  return kOk;
}

int cmd_validate(const ValidateArgs& a, std::ostream& out) {
  const Scenario scn = read_scenario(a.scenario);
  if (!fs::exists(a.solution)) throw IoError("solution file '" + a.solution + "' not found");
  Solution sol;
  try {
    sol = solution_from_json(read_json_file(a.solution));
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  } catch (const std::exception& e) {
    throw IoError("'" + a.solution + "': " + e.what());
  }
  const fs::path dir = ensure_dir(a.out_dir);
  McReport mc;
  try {
    mc = evaluate(scn, sol.inputs, a.mc);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("solution does not fit the scenario: ") + e.what());
  }
  write_json(dir / "montecarlo.json", to_json(mc));
  print_mc(mc, out);
  return mc_meets_targets(scn, mc) ? kOk : kMonteCarloBelowTarget;
}

void add_mc_flags(CLI::App* cmd, McOptions& mc) {
  cmd->add_option("--samples", mc.samples, "Monte Carlo samples (0 skips sampling)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed", mc.seed, "Monte Carlo seed");
  cmd->add_option("--threads", mc.threads, "worker threads (0 = all cores)");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Chance-constrained open-loop planning with piecewise-affine quantile bounds",
               "ccplan"};
  app.require_subcommand(1);

  QuantileArgs qa;
  auto* quantile = app.add_subcommand("quantile", "build and cache a piecewise-affine quantile");
  quantile->add_option("distribution", qa.dist, "gaussian | chi2 | chi3 | cauchy | cauchy_norm2")
      ->required();
  quantile->add_option("--step", qa.h, "probability step of the walk");
  quantile->add_option("--xi", qa.xi, "over-approximation budget (may be inf)");
  quantile->add_option("--nd", qa.n_d, "pdf derivatives used per step")->check(CLI::Range(1, 6));
  quantile->add_option("--p-lo", qa.p_lo, "lower end of the envelope (default: anchor)");
  quantile->add_option("--p-hi", qa.p_hi, "upper end of the envelope");
  quantile->add_flag("--analytic", qa.analytic, "tabulate the analytic quantile instead");
  quantile->add_option("-o,--out", qa.out_file, "output file (default pwa_<distribution>.json)");

  SolveArgs sa;
  sa.mc.samples = 100000;
  auto* solve = app.add_subcommand("solve", "plan, certify and Monte Carlo check a scenario");
  solve->add_option("scenario", sa.scenario, "scenario file")->required();
  solve->add_option("-o,--out-dir", sa.out_dir, "directory for records and tables");
  solve->add_option("--step", sa.h, "probability step of the quantile walk");
  solve->add_option("--xi", sa.xi, "quantile over-approximation budget");
  solve->add_option("--nd", sa.n_d, "pdf derivatives used per step")->check(CLI::Range(1, 6));
  solve->add_flag("--analytic-quantile", sa.analytic,
                  "use analytic quantiles where available (same reducer)");
  solve->add_option("--max-iter", sa.solver.max_iterations, "convex-concave iteration cap")
      ->check(CLI::PositiveNumber);
  solve->add_option("--tol", sa.solver.tolerance, "cost-change and slack tolerance")
      ->check(CLI::PositiveNumber);
  solve->add_option("--tau0", sa.solver.tau0, "initial slack penalty")->check(CLI::PositiveNumber);
  solve->add_option("--tau-growth", sa.solver.tau_growth, "penalty growth per iteration")
      ->check(CLI::Range(1.0, 1e6));
  solve->add_option("--tau-max", sa.solver.tau_max, "penalty cap")->check(CLI::PositiveNumber);
  solve->add_option("--pwa-cache", sa.pwa_cache, "directory caching quantile envelopes");
  add_mc_flags(solve, sa.mc);

  ValidateArgs va;
  va.mc.samples = 100000;
  auto* validate = app.add_subcommand("validate", "re-run Monte Carlo on a stored solution");
  validate->add_option("scenario", va.scenario, "scenario file")->required();
  validate->add_option("--solution", va.solution, "solution.json from solve")->required();
  validate->add_option("-o,--out-dir", va.out_dir, "directory for montecarlo.json");
  add_mc_flags(validate, va.mc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*quantile) return cmd_quantile(qa, out);
    if (*solve) return cmd_solve(sa, out);
    return cmd_validate(va, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kUsage;
  } catch (const ScenarioParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kParse;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const QuantileWalkError& e) {
    err << "quantile error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace ccplan::cli
