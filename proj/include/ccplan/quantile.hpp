#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ccplan/distributions.hpp"

namespace ccplan {

/// Raised when the quantile walk cannot continue: the density underflows in
/// the tail, or a step fails to increase the quantile.
class QuantileWalkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Derivatives of the quantile with respect to gamma = -ln p.
struct QuantileDerivs {
  double p = 0.0;
  double gamma = 0.0;
  std::vector<double> values;  // values[d - 1] = d-th derivative, d = 1..order

  double order(int d) const { return values.at(static_cast<std::size_t>(d - 1)); }
};

/// Quantile estimates on an increasing probability grid.
struct QuantileTable {
  std::vector<double> p;
  std::vector<double> q;
  double h = 0.0;
  int n_d = 0;
  std::string dist_name;

  std::size_t size() const { return p.size(); }
};

struct AffineSegment {
  double slope = 0.0;
  double intercept = 0.0;

  double operator()(double p) const { return slope * p + intercept; }
};

/// Max-of-affine over-approximation of a convex quantile on [p_lo, p_hi].
struct PwaQuantile {
  std::vector<AffineSegment> segments;
  double p_lo = 0.0;
  double p_hi = 0.0;
  double xi = 0.0;
  std::string dist_name;
  /// Largest envelope-minus-table gap found by the exhaustive scan at build
  /// time. Never exceeds xi.
  double certified_error = 0.0;
  /// Table the envelope was certified against; null when loaded from a cache.
  std::shared_ptr<const QuantileTable> source;

  /// Throws std::out_of_range outside [p_lo, p_hi].
  double eval(double p) const;
};

/// Quantile derivatives in gamma = -ln p at (p, q), orders 1..order.
///
/// The first derivative follows from the inverse function theorem,
///   dq/dgamma = -e^{-gamma} / pdf(q) = -p / pdf(q).
/// Higher orders come from differentiating that identity repeatedly with the
/// chain rule, so order d consumes pdf derivatives up to d - 1.
QuantileDerivs quantile_derivs(const ScalarDistribution& dist, double p, double q,
                               int order);

/// Taylor walk of the quantile from (p_start, q_start) up to p_end on a grid
/// of spacing h. Each step sums n_d + 1 Taylor terms in gamma, which uses pdf
/// derivatives up to order n_d. The final gap may be shorter than h so that
/// p_end is always the last point.
QuantileTable taylor_walk(const ScalarDistribution& dist, double p_start,
                          double q_start, double h, double p_end, int n_d = 3);

/// Same grid as taylor_walk, filled from the distribution's analytic quantile.
QuantileTable analytic_table(const ScalarDistribution& dist, double p_start,
                             double h, double p_end);

/// Points of `table` with p in [p_lo, p_hi] (tolerance of h * 1e-6).
QuantileTable restrict_range(const QuantileTable& table, double p_lo, double p_hi);

/// Greedy longest-chord reduction: from each breakpoint take the farthest
/// table point whose chord stays within xi above every sample it spans.
/// xi may be +infinity. Throws std::invalid_argument for xi <= 0, fewer than
/// two points, or a table that is not strictly increasing; throws
/// std::domain_error if the table is not convex enough for the envelope to
/// certify.
PwaQuantile pwa_reduce(const QuantileTable& table, double xi);

/// Convenience for pwa_reduce's result: max over segments at p.
double pwa_eval(const PwaQuantile& pwa, double p);

struct SandwichGap {
  double min_gap;  // min over table points of envelope - q
  double max_gap;  // max over table points of envelope - q
};

/// Exhaustive scan of envelope - q over every table point inside the PWA range.
SandwichGap sandwich_gap(const PwaQuantile& pwa, const QuantileTable& table);

}  // namespace ccplan
