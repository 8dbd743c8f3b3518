#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ccplan/reformulate.hpp"

namespace ccplan {

struct McOptions {
  long samples = 100000;
  std::uint64_t seed = 1;
  /// Worker threads; 0 picks the hardware concurrency. Results do not depend
  /// on the thread count.
  unsigned threads = 0;
};

struct PairTrace {
  int i = 0;
  int j = 0;
  std::vector<double> distance;  // steps 1..N
};

struct McReport {
  long samples = 0;
  std::uint64_t seed = 0;
  /// Empirical joint probabilities; empty when samples == 0.
  std::optional<double> terminal_satisfaction;
  std::optional<double> avoidance_satisfaction;
  std::optional<double> obstacle_satisfaction;  // only with static obstacles
  /// "mean" for Gaussian disturbances, "median" for Cauchy ones.
  std::string trace_statistic;
  std::vector<PairTrace> traces;
};

/// Nominal states x(1)..x(N) of every vehicle for stacked inputs `inputs`.
std::vector<std::vector<VectorXd>> nominal_trajectories(const Scenario& scn,
                                                        const std::vector<VectorXd>& inputs);

/// Samples iid disturbance sequences for every vehicle and measures the joint
/// terminal and separation events. Deterministic given the seed.
McReport evaluate(const Scenario& scn, const std::vector<VectorXd>& inputs,
                  const McOptions& options = {});

/// Per-step pairwise distance statistic (see McReport::trace_statistic).
std::vector<PairTrace> distance_trace(const Scenario& scn, const std::vector<VectorXd>& inputs,
                                      const McOptions& options = {});

}  // namespace ccplan
