#include "ccplan/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <stdexcept>
#include <numbers>
#include <thread>

#include "ccplan/kernels/kernels.hpp"

namespace ccplan {
namespace {

// Events are judged with a relative tolerance so that a plan resting exactly
// on a constraint boundary (the deterministic case) counts as satisfying it.
constexpr double kEdge = 1e-9;

constexpr std::size_t kChunk = 1024;

struct ChunkResult {
  long terminal_ok = 0;
  long avoid_ok = 0;
  long obstacle_ok = 0;
  std::vector<double> distance_sum;  // [pair * N + k]
};

// Everything a worker needs, precomputed once.
struct Plan {
  const Scenario* scn;
  std::size_t n, m, N, rows, vehicles, pairs;
  std::vector<std::pair<int, int>> pair_list;
  std::vector<double> A;       // row-major n x n
  std::vector<double> L;       // Gaussian noise factor, row-major n x n
  std::vector<double> S;       // row-major rows x n
  std::vector<double> gamma;   // Cauchy scales
  bool gaussian;
  bool keep_samples;
  // Nominal position differences S(x_i - x_j)(k) per pair and step.
  std::vector<std::vector<double>> pair_offset;
  // Nominal S x_v(k) - o per vehicle, obstacle and step.
  std::vector<std::vector<double>> obstacle_offset;
  std::vector<VectorXd> terminal_slack;  // p - P x_nom(N), per vehicle
  std::size_t samples;
  std::uint64_t seed;
  std::vector<double>* all_distances;  // [pair][k][sample] when keep_samples
};

std::vector<double> row_major(const MatrixXd& M) {
  std::vector<double> out(static_cast<std::size_t>(M.size()));
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c)
      out[static_cast<std::size_t>(r * M.cols() + c)] = M(r, c);
  return out;
}

MatrixXd psd_factor(const MatrixXd& sigma) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sigma);
  const VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

ChunkResult run_chunk(const Plan& plan, std::size_t chunk) {
  const std::size_t first = chunk * kChunk;
  const std::size_t lanes = std::min(kChunk, plan.samples - first);
  const std::size_t n = plan.n;
  const std::size_t N = plan.N;
  const std::size_t rows = plan.rows;
  const Scenario& scn = *plan.scn;

  std::seed_seq seq{static_cast<std::uint32_t>(plan.seed & 0xffffffffu),
                    static_cast<std::uint32_t>(plan.seed >> 32),
                    static_cast<std::uint32_t>(chunk & 0xffffffffu),
                    static_cast<std::uint32_t>(chunk >> 32)};
  Rng rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Deviation from the nominal trajectory: e(k+1) = A e(k) + w(k).
  std::vector<std::vector<double>> dev(plan.vehicles, std::vector<double>(n * lanes, 0.0));
  std::vector<std::vector<double>> pos(plan.vehicles, std::vector<double>(rows * lanes, 0.0));
  std::vector<double> z(n * lanes);
  std::vector<double> w(n * lanes);
  std::vector<double> next(n * lanes);
  std::vector<double> d2(lanes);
  std::vector<double> zeros(rows * lanes, 0.0);
  std::vector<char> avoid_ok(lanes, 1);
  std::vector<char> obstacle_ok(lanes, 1);

  ChunkResult res;
  res.distance_sum.assign(plan.pairs * N, 0.0);
  const double r2 = scn.r * scn.r * (1.0 - kEdge);

  for (std::size_t k = 0; k < N; ++k) {
    for (std::size_t v = 0; v < plan.vehicles; ++v) {
      if (plan.gaussian) {
        for (double& x : z) x = normal(rng);
        kernels::matvec_batch(plan.L, n, n, z, {}, w, lanes);
      } else {
        for (std::size_t d = 0; d < n; ++d) {
          for (std::size_t b = 0; b < lanes; ++b) {
            double u = unif(rng);
            while (u <= 0.0) u = unif(rng);
            w[d * lanes + b] = plan.gamma[d] * std::tan(std::numbers::pi * (u - 0.5));
          }
        }
      }
      kernels::matvec_batch(plan.A, n, n, dev[v], w, next, lanes);
      dev[v].swap(next);
      kernels::matvec_batch(plan.S, rows, n, dev[v], {}, pos[v], lanes);
    }
    for (std::size_t p = 0; p < plan.pairs; ++p) {
      const auto [i, j] = plan.pair_list[p];
      const std::span<const double> offset(plan.pair_offset[p].data() + k * rows, rows);
      kernels::pair_distance_sq(pos[static_cast<std::size_t>(i)], pos[static_cast<std::size_t>(j)],
                                offset, rows, d2, lanes);
      double sum = 0.0;
      for (std::size_t b = 0; b < lanes; ++b) {
        if (d2[b] < r2) avoid_ok[b] = 0;
        const double dist = std::sqrt(d2[b]);
        sum += dist;
        if (plan.keep_samples) {
          (*plan.all_distances)[(p * N + k) * plan.samples + first + b] = dist;
        }
      }
      res.distance_sum[p * N + k] = sum;
    }
    for (std::size_t v = 0; v < plan.vehicles; ++v) {
      for (std::size_t o = 0; o < scn.obstacles.size(); ++o) {
        const double radius = scn.obstacles[o].radius;
        const std::span<const double> offset(
            plan.obstacle_offset[v * scn.obstacles.size() + o].data() + k * rows, rows);
        kernels::pair_distance_sq(pos[v], zeros, offset, rows, d2, lanes);
        for (std::size_t b = 0; b < lanes; ++b) {
          if (d2[b] < radius * radius * (1.0 - kEdge)) obstacle_ok[b] = 0;
        }
      }
    }
  }

  for (std::size_t b = 0; b < lanes; ++b) {
    bool inside = true;
    for (std::size_t v = 0; v < plan.vehicles && inside; ++v) {
      const Polytope& target = scn.vehicles[v].target;
      for (Eigen::Index f = 0; f < target.faces() && inside; ++f) {
        double pe = 0.0;
        for (std::size_t d = 0; d < n; ++d) pe += target.P(f, static_cast<Eigen::Index>(d)) * dev[v][d * lanes + b];
        if (pe > plan.terminal_slack[v](f)) inside = false;
      }
    }
    res.terminal_ok += inside ? 1 : 0;
    res.avoid_ok += avoid_ok[b];
    res.obstacle_ok += obstacle_ok[b];
  }
  return res;
}

}  // namespace

std::vector<std::vector<VectorXd>> nominal_trajectories(const Scenario& scn,
                                                        const std::vector<VectorXd>& inputs) {
  if (inputs.size() != scn.vehicles.size()) {
    throw std::invalid_argument("Monte Carlo: expected inputs for " +
                                std::to_string(scn.vehicles.size()) + " vehicles, got " +
                                std::to_string(inputs.size()));
  }
  std::vector<std::vector<VectorXd>> out;
  for (std::size_t v = 0; v < inputs.size(); ++v) {
    if (inputs[v].size() != scn.inputs_per_vehicle()) {
      throw std::invalid_argument("Monte Carlo: vehicle " + std::to_string(v) + " has " +
                                  std::to_string(inputs[v].size()) + " inputs, expected " +
                                  std::to_string(scn.inputs_per_vehicle()));
    }
    out.push_back(propagate(scn.system, scn.vehicles[v].x0, inputs[v], VectorXd()));
  }
  return out;
}

McReport evaluate(const Scenario& scn, const std::vector<VectorXd>& inputs,
                  const McOptions& options) {
  scn.validate();
  if (options.samples < 0) throw std::invalid_argument("Monte Carlo: samples must be >= 0");
  const auto nominal = nominal_trajectories(scn, inputs);

  McReport report;
  report.samples = options.samples;
  report.seed = options.seed;
  const bool gaussian = scn.disturbance.kind == DisturbanceKind::kGaussian;
  report.trace_statistic = gaussian ? "mean" : "median";
  if (options.samples == 0) return report;

  Plan plan;
  plan.scn = &scn;
  plan.n = static_cast<std::size_t>(scn.system.n());
  plan.m = static_cast<std::size_t>(scn.system.m());
  plan.N = static_cast<std::size_t>(scn.horizon);
  plan.rows = static_cast<std::size_t>(scn.S.rows());
  plan.vehicles = scn.vehicles.size();
  for (int i = 0; i < static_cast<int>(plan.vehicles); ++i)
    for (int j = i + 1; j < static_cast<int>(plan.vehicles); ++j) plan.pair_list.emplace_back(i, j);
  plan.pairs = plan.pair_list.size();
  plan.A = row_major(scn.system.A);
  plan.S = row_major(scn.S);
  plan.gaussian = gaussian;
  if (gaussian) {
    plan.L = row_major(psd_factor(scn.disturbance.sigma));
  } else {
    plan.gamma.assign(scn.disturbance.gamma.data(),
                      scn.disturbance.gamma.data() + scn.disturbance.gamma.size());
  }
  for (const auto& [i, j] : plan.pair_list) {
    std::vector<double> off;
    for (std::size_t k = 0; k < plan.N; ++k) {
      const VectorXd d = scn.S * (nominal[static_cast<std::size_t>(i)][k] -
                                  nominal[static_cast<std::size_t>(j)][k]);
      off.insert(off.end(), d.data(), d.data() + d.size());
    }
    plan.pair_offset.push_back(std::move(off));
  }
  for (std::size_t v = 0; v < plan.vehicles; ++v) {
    for (const auto& obs : scn.obstacles) {
      std::vector<double> off;
      for (std::size_t k = 0; k < plan.N; ++k) {
        const VectorXd d = scn.S * nominal[v][k] - obs.center;
        off.insert(off.end(), d.data(), d.data() + d.size());
      }
      plan.obstacle_offset.push_back(std::move(off));
    }
    const Polytope& target = scn.vehicles[v].target;
    VectorXd slack = target.p - target.P * nominal[v].back();
    slack.array() += kEdge * (1.0 + target.p.array().abs());
    plan.terminal_slack.push_back(std::move(slack));
  }
  plan.samples = static_cast<std::size_t>(options.samples);
  plan.seed = options.seed;
  plan.keep_samples = !gaussian;
  std::vector<double> all;
  if (plan.keep_samples) all.resize(plan.pairs * plan.N * plan.samples);
  plan.all_distances = &all;

  const std::size_t chunks = (plan.samples + kChunk - 1) / kChunk;
  std::vector<ChunkResult> results(chunks);
  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, chunks));
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t c = next++; c < chunks; c = next++) results[c] = run_chunk(plan, c);
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  long terminal = 0, avoid = 0, obstacle = 0;
  std::vector<double> distance_sum(plan.pairs * plan.N, 0.0);
  for (const auto& r : results) {
    terminal += r.terminal_ok;
    avoid += r.avoid_ok;
    obstacle += r.obstacle_ok;
    for (std::size_t i = 0; i < distance_sum.size(); ++i) distance_sum[i] += r.distance_sum[i];
  }
  const double total = static_cast<double>(plan.samples);
  report.terminal_satisfaction = static_cast<double>(terminal) / total;
  report.avoidance_satisfaction = static_cast<double>(avoid) / total;
  if (!scn.obstacles.empty()) report.obstacle_satisfaction = static_cast<double>(obstacle) / total;

  for (std::size_t p = 0; p < plan.pairs; ++p) {
    PairTrace trace;
    trace.i = plan.pair_list[p].first;
    trace.j = plan.pair_list[p].second;
    for (std::size_t k = 0; k < plan.N; ++k) {
      if (gaussian) {
        trace.distance.push_back(distance_sum[p * plan.N + k] / total);
      } else {
        auto begin = all.begin() + static_cast<long>((p * plan.N + k) * plan.samples);
        auto end = begin + static_cast<long>(plan.samples);
        auto mid = begin + static_cast<long>(plan.samples / 2);
        std::nth_element(begin, mid, end);
        double med = *mid;
        if (plan.samples % 2 == 0) med = 0.5 * (med + *std::max_element(begin, mid));
        trace.distance.push_back(med);
      }
    }
    report.traces.push_back(std::move(trace));
  }
  return report;
}

std::vector<PairTrace> distance_trace(const Scenario& scn, const std::vector<VectorXd>& inputs,
                                      const McOptions& options) {
  return evaluate(scn, inputs, options).traces;
}

}  // namespace ccplan
