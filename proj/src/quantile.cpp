#include "ccplan/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

#include "ccplan/kernels/kernels.hpp"

namespace ccplan {
namespace {

constexpr double kPdfUnderflow = 1e-300;
// Slack allowed when a probability computed as 1 - risk lands a rounding
// error outside the envelope's range.
constexpr double kRangeSlack = 1e-12;

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

void validate_grid(double p_start, double h, double p_end) {
  if (!(p_start > 0.0 && p_start < 1.0)) {
    throw std::invalid_argument("quantile walk: p_start must lie in (0,1)");
  }
  if (!(p_end >= p_start && p_end < 1.0)) {
    throw std::invalid_argument("quantile walk: need p_start <= p_end < 1");
  }
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw std::invalid_argument("quantile walk: step h must be positive");
  }
}

// Grid p_c = p_start + c h, cut short so the last point is exactly p_end.
std::vector<double> probability_grid(double p_start, double h, double p_end) {
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>((p_end - p_start) / h) + 2);
  grid.push_back(p_start);
  for (std::size_t c = 1; grid.back() < p_end; ++c) {
    double p = p_start + static_cast<double>(c) * h;
    if (p >= p_end - 1e-6 * h) p = p_end;
    grid.push_back(p);
  }
  return grid;
}

struct Candidate {
  AffineSegment segment;
  double above;  // max over the spanned points of (segment - q); >= 0
};

// Chord through table points i and j, raised just enough that it sits on or
// above every point it spans (a convex table needs no raise; rounding might).
Candidate make_candidate(const QuantileTable& t, std::size_t i, std::size_t j) {
  const double slope = (t.q[j] - t.q[i]) / (t.p[j] - t.p[i]);
  double intercept = t.q[i] - t.p[i] * slope;
  const std::span<const double> ps(t.p.data() + i, j - i + 1);
  const std::span<const double> qs(t.q.data() + i, j - i + 1);
  auto ex = kernels::chord_excess(ps, qs, slope, intercept);
  while (ex.below > 0.0) {
    intercept = std::nextafter(intercept + ex.below, std::numeric_limits<double>::infinity());
    ex = kernels::chord_excess(ps, qs, slope, intercept);
  }
  return Candidate{AffineSegment{slope, intercept}, std::max(ex.above, 0.0)};
}

}  // namespace

double PwaQuantile::eval(double p) const {
  if (segments.empty()) throw std::logic_error("empty piecewise-affine quantile");
  if (!(p >= p_lo - kRangeSlack && p <= p_hi + kRangeSlack)) {
    throw std::out_of_range("piecewise-affine quantile '" + dist_name +
                            "' evaluated at p=" + std::to_string(p) +
                            " outside its range [" + std::to_string(p_lo) + ", " +
                            std::to_string(p_hi) + "]");
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& s : segments) best = std::max(best, s(p));
  return best;
}

double pwa_eval(const PwaQuantile& pwa, double p) { return pwa.eval(p); }

QuantileDerivs quantile_derivs(const ScalarDistribution& dist, double p, double q,
                               int order) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("quantile_derivs: p must lie in (0,1)");
  }
  if (order < 1 || order > dist.max_derivative_order() + 1) {
    throw std::invalid_argument("quantile_derivs: order " + std::to_string(order) +
                                " needs pdf derivatives beyond what '" + dist.name() +
                                "' provides");
  }
  const double density = dist.pdf(q);
  if (!(density >= kPdfUnderflow)) {
    throw QuantileWalkError("quantile walk for '" + dist.name() +
                            "' reached a tail where the pdf underflows (q=" +
                            std::to_string(q) + ")");
  }

  // Work with Taylor coefficients in t = gamma - gamma_0. Writing
  //   q(t) = sum a_k t^k,  p(t) = p e^{-t},  F(t) = pdf(q(t)),
  // the identity q'(t) = -p(t) / F(t) fixes a_{k+1} from a_0..a_k:
  //   F(t)  = sum_j pdf^(j)(q) / j! * (q(t) - q)^j          (chain rule)
  //   R(t)  = p(t) / F(t),   R_k = (P_k - sum_{i>=1} F_i R_{k-i}) / F_0
  //   a_{k+1} = -R_k / (k + 1)
  // and the d-th derivative is d! a_d.
  const auto K = static_cast<std::size_t>(order);
  std::vector<double> dens(K);
  dens[0] = density;
  for (std::size_t j = 1; j < K; ++j) {
    dens[j] = dist.pdf_derivative(static_cast<int>(j), q) / factorial(static_cast<int>(j));
  }

  std::vector<double> a(K + 1, 0.0);
  a[0] = q;
  std::vector<double> R(K, 0.0);
  std::vector<double> F(K, 0.0);
  std::vector<double> power(K, 0.0);
  std::vector<double> next(K, 0.0);

  for (std::size_t k = 0; k < K; ++k) {
    // F_0..F_k from powers of delta(t) = sum_{i>=1} a_i t^i.
    std::fill(F.begin(), F.begin() + static_cast<long>(k) + 1, 0.0);
    std::fill(power.begin(), power.end(), 0.0);
    power[0] = 1.0;
    F[0] = dens[0];
    for (std::size_t j = 1; j <= k; ++j) {
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t deg = 0; deg <= k; ++deg) {
        if (power[deg] == 0.0) continue;
        for (std::size_t i = 1; deg + i <= k; ++i) next[deg + i] += power[deg] * a[i];
      }
      power.swap(next);
      for (std::size_t deg = j; deg <= k; ++deg) F[deg] += dens[j] * power[deg];
    }
    const double p_k = p * ((k % 2 == 0) ? 1.0 : -1.0) / factorial(static_cast<int>(k));
    double acc = p_k;
    for (std::size_t i = 1; i <= k; ++i) acc -= F[i] * R[k - i];
    R[k] = acc / F[0];
    a[k + 1] = -R[k] / static_cast<double>(k + 1);
  }

  QuantileDerivs out;
  out.p = p;
  out.gamma = -std::log(p);
  out.values.resize(K);
  for (std::size_t d = 1; d <= K; ++d) {
    out.values[d - 1] = factorial(static_cast<int>(d)) * a[d];
  }
  return out;
}

QuantileTable taylor_walk(const ScalarDistribution& dist, double p_start,
                          double q_start, double h, double p_end, int n_d) {
  validate_grid(p_start, h, p_end);
  if (n_d < 1 || n_d > dist.max_derivative_order()) {
    throw std::invalid_argument("taylor_walk: n_d must be in [1, " +
                                std::to_string(dist.max_derivative_order()) + "] for '" +
                                dist.name() + "'");
  }
  QuantileTable table;
  table.h = h;
  table.n_d = n_d;
  table.dist_name = dist.name();
  table.p = probability_grid(p_start, h, p_end);
  table.q.resize(table.p.size());
  table.q[0] = q_start;

  const int terms = n_d + 1;
  std::vector<double> inv_fact(static_cast<std::size_t>(terms) + 1);
  for (int d = 0; d <= terms; ++d) inv_fact[static_cast<std::size_t>(d)] = 1.0 / factorial(d);

  for (std::size_t c = 0; c + 1 < table.p.size(); ++c) {
    const double p = table.p[c];
    const double q = table.q[c];
    const auto derivs = quantile_derivs(dist, p, q, terms);
    const double log_ratio = std::log1p((table.p[c + 1] - p) / p);
    // q(p_{c+1}) = q(p_c) + sum_d (-1)^d q^(d) log(p_{c+1}/p_c)^d / d!
    double step = 0.0;
    double power = 1.0;
    for (int d = 1; d <= terms; ++d) {
      power *= -log_ratio;
      step += derivs.order(d) * power * inv_fact[static_cast<std::size_t>(d)];
    }
    const double q_next = q + step;
    if (!(q_next > q)) {
      throw QuantileWalkError("quantile walk for '" + dist.name() +
                              "' stopped increasing at p=" + std::to_string(p));
    }
    table.q[c + 1] = q_next;
  }
  return table;
}

QuantileTable analytic_table(const ScalarDistribution& dist, double p_start,
                             double h, double p_end) {
  validate_grid(p_start, h, p_end);
  QuantileTable table;
  table.h = h;
  table.n_d = 0;
  table.dist_name = dist.name();
  table.p = probability_grid(p_start, h, p_end);
  table.q.resize(table.p.size());
  std::transform(table.p.begin(), table.p.end(), table.q.begin(),
                 [&](double p) { return dist.analytic_quantile(p); });
  return table;
}

QuantileTable restrict_range(const QuantileTable& table, double p_lo, double p_hi) {
  const double tol = table.h * 1e-6;
  QuantileTable out;
  out.h = table.h;
  out.n_d = table.n_d;
  out.dist_name = table.dist_name;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table.p[i] >= p_lo - tol && table.p[i] <= p_hi + tol) {
      out.p.push_back(table.p[i]);
      out.q.push_back(table.q[i]);
    }
  }
  return out;
}

PwaQuantile pwa_reduce(const QuantileTable& table, double xi) {
  if (!(xi > 0.0)) throw std::invalid_argument("pwa_reduce: xi must be positive");
  if (table.size() < 2 || table.q.size() != table.size()) {
    throw std::invalid_argument("pwa_reduce: table needs at least two points");
  }
  for (std::size_t i = 1; i < table.size(); ++i) {
    if (!(table.p[i] > table.p[i - 1]) || !(table.q[i] > table.q[i - 1])) {
      throw std::invalid_argument("pwa_reduce: table is not strictly increasing at index " +
                                  std::to_string(i));
    }
  }

  const std::size_t last = table.size() - 1;
  auto fits = [&](std::size_t i, std::size_t j) { return make_candidate(table, i, j).above <= xi; };

  PwaQuantile pwa;
  pwa.p_lo = table.p.front();
  pwa.p_hi = table.p.back();
  pwa.xi = xi;
  pwa.dist_name = table.dist_name;

  std::size_t i = 0;
  while (i < last) {
    // On a convex table the chord's excess grows with j, so the farthest
    // admissible end point can be bracketed by doubling and then bisected.
    std::size_t j = last;
    if (!fits(i, last)) {
      std::size_t good = i + 1;
      std::size_t bad = last;
      for (std::size_t stride = 2; i + stride < last; stride *= 2) {
        if (!fits(i, i + stride)) {
          bad = i + stride;
          break;
        }
        good = i + stride;
      }
      while (bad - good > 1) {
        const std::size_t mid = good + (bad - good) / 2;
        (fits(i, mid) ? good : bad) = mid;
      }
      j = good;
    }
    const AffineSegment seg = make_candidate(table, i, j).segment;
    if (!pwa.segments.empty() && seg.slope <= pwa.segments.back().slope) {
      if (seg.slope == pwa.segments.back().slope) {
        pwa.segments.back().intercept = std::max(pwa.segments.back().intercept, seg.intercept);
      } else {
        throw std::domain_error("pwa_reduce: table for '" + table.dist_name +
                                "' is not convex near p=" + std::to_string(table.p[i]));
      }
    } else {
      pwa.segments.push_back(seg);
    }
    i = j;
  }

  const SandwichGap gap = sandwich_gap(pwa, table);
  if (gap.min_gap < 0.0 || gap.max_gap > xi) {
    throw std::domain_error("pwa_reduce: envelope for '" + table.dist_name +
                            "' failed certification (gap range [" +
                            std::to_string(gap.min_gap) + ", " +
                            std::to_string(gap.max_gap) + "])");
  }
  pwa.certified_error = gap.max_gap;
  pwa.source = std::make_shared<const QuantileTable>(table);
  return pwa;
}

SandwichGap sandwich_gap(const PwaQuantile& pwa, const QuantileTable& table) {
  std::vector<double> slopes;
  std::vector<double> intercepts;
  for (const auto& s : pwa.segments) {
    slopes.push_back(s.slope);
    intercepts.push_back(s.intercept);
  }
  const QuantileTable inside = restrict_range(table, pwa.p_lo, pwa.p_hi);
  std::vector<double> env(inside.size());
  kernels::pwa_envelope(slopes, intercepts, inside.p, env);
  SandwichGap gap{std::numeric_limits<double>::infinity(),
                  -std::numeric_limits<double>::infinity()};
  for (std::size_t k = 0; k < inside.size(); ++k) {
    const double d = env[k] - inside.q[k];
    gap.min_gap = std::min(gap.min_gap, d);
    gap.max_gap = std::max(gap.max_gap, d);
  }
  return gap;
}

}  // namespace ccplan
