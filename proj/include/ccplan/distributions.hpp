#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace ccplan {

using Rng = std::mt19937_64;

struct Anchor {
  double p;  // probability level in (0, 1)
  double q;  // quantile at p
};

struct Support {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  bool contains(double x) const { return x >= lower && x <= upper; }
};

/// A continuous scalar distribution described by its density and the density's
/// closed-form derivatives, plus one known quantile to start a quantile walk
/// from. Immutable after construction; copies share the underlying callables.
///
/// Custom distributions are built by supplying the callables directly.
/// `derivative(order, x)` must return the order-th derivative of the density
/// at x for 0 <= order <= max_order (order 0 is the density itself) and 0
/// outside the support.
class ScalarDistribution {
 public:
  using DerivativeFn = std::function<double(int order, double x)>;
  using SamplerFn = std::function<double(Rng&)>;
  using QuantileFn = std::function<double(double p)>;

  ScalarDistribution(std::string name, DerivativeFn derivative, int max_order,
                     Anchor anchor, Support support, SamplerFn sampler,
                     QuantileFn analytic_quantile = {});

  const std::string& name() const { return name_; }
  double pdf(double x) const { return derivative_(0, x); }
  /// order-th derivative of the pdf; throws for order outside [0, max_order].
  double pdf_derivative(int order, double x) const;
  int max_derivative_order() const { return max_order_; }
  const Anchor& anchor() const { return anchor_; }
  const Support& support() const { return support_; }
  double draw(Rng& rng) const { return sampler_(rng); }

  bool has_analytic_quantile() const { return static_cast<bool>(quantile_); }
  /// Exact quantile for distributions that have one. Exposed for oracle
  /// checks and the analytic-table comparison; throws otherwise.
  double analytic_quantile(double p) const;

 private:
  std::string name_;
  DerivativeFn derivative_;
  int max_order_;
  Anchor anchor_;
  Support support_;
  SamplerFn sampler_;
  QuantileFn quantile_;
};

using DistributionPtr = std::shared_ptr<const ScalarDistribution>;

ScalarDistribution make_std_gaussian();

/// Chi distribution with k degrees of freedom, k in {2, 3}. Anchored at
/// p = 0.9; the anchor quantile is found by bisection on the integrated pdf.
ScalarDistribution make_chi(int k);

ScalarDistribution make_std_cauchy();

/// Distribution of the Euclidean norm of a 2-vector of iid standard Cauchy
/// variables, anchored at p = 0.9.
ScalarDistribution make_cauchy_norm2();

/// Closed forms for the squared norm of two iid standard Cauchy variables.
namespace cauchy_norm2_squared {
double pdf(double x);
double cdf(double x);
double quantile(double p);
}  // namespace cauchy_norm2_squared

/// count iid draws. Throws std::invalid_argument when count < 1.
std::vector<double> sample(const ScalarDistribution& dist, Rng& rng, long count);

/// Built-in distribution by name: "gaussian", "chi2", "chi3", "cauchy",
/// "cauchy_norm2". Throws std::invalid_argument for unknown names.
DistributionPtr builtin_distribution(const std::string& name);

namespace detail {
/// Numerically integrated cdf. Used to locate anchors and by oracle checks;
/// the planner itself never needs a cdf.
double integrated_cdf(const ScalarDistribution& dist, double x);
}  // namespace detail

}  // namespace ccplan
