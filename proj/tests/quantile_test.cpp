#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include "ccplan/quantile.hpp"

using namespace ccplan;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cauchy_q(double p) { return std::tan(std::numbers::pi * (p - 0.5)); }

QuantileTable walk_from_anchor(const ScalarDistribution& d, double h, double p_end) {
  return taylor_walk(d, d.anchor().p, d.anchor().q, h, p_end, 3);
}

double max_cauchy_error(double h) {
  const auto t = walk_from_anchor(make_std_cauchy(), h, 0.9999);
  double worst = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    worst = std::max(worst, std::abs(t.q[i] - cauchy_q(t.p[i])));
  }
  return worst;
}

// d-th derivative of Q(gamma) = tan(pi (e^-gamma - 1/2)) by central differences.
double cauchy_fd(int d, double gamma) {
  const auto Q = [](double g) { return cauchy_q(std::exp(-g)); };
  const double s = 1e-3 * std::min(gamma, 1.0);
  switch (d) {
    case 1: return (Q(gamma + s) - Q(gamma - s)) / (2 * s);
    case 2: return (Q(gamma + s) - 2 * Q(gamma) + Q(gamma - s)) / (s * s);
    default:
      return (Q(gamma + 2 * s) - 2 * Q(gamma + s) + 2 * Q(gamma - s) - Q(gamma - 2 * s)) /
             (2 * s * s * s);
  }
}

void expect_sandwich(const PwaQuantile& pwa, const QuantileTable& table, double xi) {
  double lo = kInf;
  double hi = -kInf;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table.p[i] < pwa.p_lo || table.p[i] > pwa.p_hi) continue;
    double env = -kInf;
    for (const auto& s : pwa.segments) env = std::max(env, s.slope * table.p[i] + s.intercept);
    lo = std::min(lo, env - table.q[i]);
    hi = std::max(hi, env - table.q[i]);
  }
  EXPECT_GE(lo, 0.0) << table.dist_name << " xi " << xi;
  EXPECT_LE(hi, xi) << table.dist_name << " xi " << xi;
}

}  // namespace

TEST(QuantileDerivs, FirstOrderExamples) {
  const auto g = quantile_derivs(make_std_gaussian(), 0.5, 0.0, 1);
  EXPECT_NEAR(g.order(1), -0.5 / 0.3989422804014327, 1e-12);
  EXPECT_NEAR(g.order(1), -1.25331, 1e-5);
  EXPECT_NEAR(g.gamma, std::log(2.0), 1e-15);
  const auto c = quantile_derivs(make_std_cauchy(), 0.5, 0.0, 1);
  EXPECT_NEAR(c.order(1), -0.5 * std::numbers::pi, 1e-12);
  EXPECT_NEAR(c.order(1), -1.57080, 1e-5);
}

TEST(QuantileDerivs, FirstOrderIsInverseFunctionTheorem) {
  for (const char* name : {"gaussian", "chi3", "cauchy", "cauchy_norm2"}) {
    const auto d = builtin_distribution(name);
    const auto r = quantile_derivs(*d, d->anchor().p, d->anchor().q, 1);
    EXPECT_EQ(r.order(1), -std::exp(-r.gamma) / d->pdf(d->anchor().q)) << name;
  }
}

TEST(QuantileDerivs, MatchCauchyFiniteDifferences) {
  const auto c = make_std_cauchy();
  for (int i = 0; i < 50; ++i) {
    const double p = 0.5 + 0.499 * (i + 0.5) / 50.0;
    const auto r = quantile_derivs(c, p, cauchy_q(p), 3);
    for (int d = 1; d <= 3; ++d) {
      const double fd = cauchy_fd(d, -std::log(p));
      EXPECT_LE(std::abs(r.order(d) - fd), 1e-4 * std::abs(fd)) << "p " << p << " d " << d;
    }
  }
}

TEST(QuantileDerivs, RejectsBadArguments) {
  const auto c = make_std_cauchy();
  EXPECT_THROW(quantile_derivs(c, 0.0, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(quantile_derivs(c, 1.0, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(quantile_derivs(c, 0.5, 0.0, c.max_derivative_order() + 2), std::invalid_argument);
  EXPECT_THROW(quantile_derivs(make_std_gaussian(), 0.999, 60.0, 2), QuantileWalkError);
}

TEST(TaylorWalk, GaussianAtNinety) {
  const auto t = walk_from_anchor(make_std_gaussian(), 5e-6, 0.999);
  const auto it = std::min_element(t.p.begin(), t.p.end(),
                                   [](double a, double b) { return std::abs(a - 0.9) < std::abs(b - 0.9); });
  const std::size_t i = static_cast<std::size_t>(it - t.p.begin());
  ASSERT_NEAR(t.p[i], 0.9, 1e-9);
  EXPECT_NEAR(t.q[i], 1.281552, 1e-4);
  EXPECT_NEAR(t.q[i], boost::math::quantile(boost::math::normal(), 0.9), 1e-4);
}

TEST(TaylorWalk, GridInvariants) {
  const double h = 1e-5;
  const auto t = walk_from_anchor(make_chi(3), h, 0.999995);
  ASSERT_GE(t.size(), 2u);
  EXPECT_EQ(t.p.front(), 0.9);
  EXPECT_EQ(t.p.back(), 0.999995);
  EXPECT_LT(t.p.back() - t.p[t.size() - 2], h);
  double worst = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    EXPECT_GT(t.p[i], t.p[i - 1]);
    EXPECT_GT(t.q[i], t.q[i - 1]);
    EXPECT_LE(t.p[i] - t.p[i - 1], h * (1 + 1e-6));
    if (i + 1 < t.size()) EXPECT_NEAR(t.p[i] - t.p[i - 1], h, 1e-12);
    if (t.p[i] <= 0.9999) {
      const double oracle = std::sqrt(2.0 * boost::math::gamma_p_inv(1.5, t.p[i]));
      worst = std::max(worst, std::abs(t.q[i] - oracle));
    }
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(TaylorWalk, EmptyWalkIsAnchor) {
  const auto c = make_std_cauchy();
  const auto t = taylor_walk(c, 0.5, 0.0, 1e-3, 0.5);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t.p[0], 0.5);
  EXPECT_EQ(t.q[0], 0.0);
}

TEST(TaylorWalk, RejectsBadGrid) {
  const auto c = make_std_cauchy();
  EXPECT_THROW(taylor_walk(c, 0.5, 0.0, 0.0, 0.9), std::invalid_argument);
  EXPECT_THROW(taylor_walk(c, 0.5, 0.0, 1e-3, 0.4), std::invalid_argument);
  EXPECT_THROW(taylor_walk(c, 0.5, 0.0, 1e-3, 1.0), std::invalid_argument);
  EXPECT_THROW(taylor_walk(c, 0.5, 0.0, 1e-3, 0.9, 0), std::invalid_argument);
}

TEST(TaylorWalk, HalvingStepHalvesCauchyError) {
  const double e40 = max_cauchy_error(4e-5);
  const double e20 = max_cauchy_error(2e-5);
  const double e10 = max_cauchy_error(1e-5);
  EXPECT_GE(e40 / e20, 2.0);
  EXPECT_GE(e20 / e10, 2.0);
}

TEST(TaylorWalk, AnalyticTableSharesGrid) {
  const auto c = make_std_cauchy();
  const auto a = analytic_table(c, 0.5, 1e-3, 0.99);
  const auto w = taylor_walk(c, 0.5, 0.0, 1e-3, 0.99);
  EXPECT_EQ(a.p, w.p);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.q[i], cauchy_q(a.p[i]));
  EXPECT_THROW(analytic_table(make_chi(3), 0.9, 1e-3, 0.99), std::logic_error);
}

TEST(RestrictRange, KeepsInclusiveSpan) {
  const auto t = analytic_table(make_std_cauchy(), 0.5, 0.1, 0.95);
  const auto r = restrict_range(t, 0.6, 0.8);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_NEAR(r.p.front(), 0.6, 1e-12);
  EXPECT_NEAR(r.p.back(), 0.8, 1e-12);
}

TEST(PwaReduce, InfiniteBudgetGivesEndToEndChord) {
  const auto t = walk_from_anchor(make_std_cauchy(), 1e-4, 0.999);
  const auto pwa = pwa_reduce(t, kInf);
  ASSERT_EQ(pwa.segments.size(), 1u);
  EXPECT_NEAR(pwa.eval(t.p.front()), t.q.front(), 1e-9);
  EXPECT_NEAR(pwa.eval(t.p.back()), t.q.back(), 1e-9 * t.q.back());
}

TEST(PwaReduce, CollinearPointsGiveOneSegment) {
  QuantileTable t;
  t.p = {0.5, 0.6, 0.7};
  t.q = {1.0, 2.0, 3.0};
  t.h = 0.1;
  for (double xi : {1e-9, 0.1, 5.0}) {
    const auto pwa = pwa_reduce(t, xi);
    ASSERT_EQ(pwa.segments.size(), 1u);
    EXPECT_NEAR(pwa.segments[0].slope, 10.0, 1e-9);
  }
}

TEST(PwaReduce, RejectsBadInput) {
  QuantileTable t;
  t.p = {0.5, 0.6, 0.7};
  t.q = {1.0, 2.0, 3.0};
  EXPECT_THROW(pwa_reduce(t, 0.0), std::invalid_argument);
  EXPECT_THROW(pwa_reduce(t, -1.0), std::invalid_argument);
  QuantileTable one;
  one.p = {0.5};
  one.q = {0.0};
  EXPECT_THROW(pwa_reduce(one, 0.1), std::invalid_argument);
  QuantileTable down = t;
  down.q = {1.0, 0.5, 3.0};
  EXPECT_THROW(pwa_reduce(down, 0.1), std::invalid_argument);
  QuantileTable concave = t;
  concave.p = {0.5, 0.6, 0.7, 0.8};
  concave.q = {0.0, 3.0, 4.0, 4.5};
  EXPECT_THROW(pwa_reduce(concave, 1e-3), std::domain_error);
}

TEST(PwaReduce, SandwichAllDistributions) {
  for (const char* name : {"gaussian", "chi2", "chi3", "cauchy", "cauchy_norm2"}) {
    const auto d = builtin_distribution(name);
    const auto t = walk_from_anchor(*d, 1e-5, 0.9999);
    for (double xi : {0.01, 0.1, 1.0}) {
      const auto pwa = pwa_reduce(t, xi);
      expect_sandwich(pwa, t, xi);
      EXPECT_LE(pwa.certified_error, xi);
      for (std::size_t s = 1; s < pwa.segments.size(); ++s) {
        EXPECT_GT(pwa.segments[s].slope, pwa.segments[s - 1].slope) << name;
      }
    }
  }
}

TEST(PwaReduce, EnvelopeMonotoneInP) {
  const auto t = walk_from_anchor(make_std_cauchy(), 1e-5, 0.9999);
  const auto pwa = pwa_reduce(t, 0.1);
  double prev = -kInf;
  for (int i = 0; i <= 20000; ++i) {
    const double p = pwa.p_lo + (pwa.p_hi - pwa.p_lo) * i / 20000.0;
    const double v = pwa.eval(p);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(PwaReduce, Deterministic) {
  const auto t = walk_from_anchor(make_cauchy_norm2(), 1e-5, 0.9999);
  const auto a = pwa_reduce(t, 0.1);
  const auto b = pwa_reduce(t, 0.1);
  ASSERT_EQ(a.segments.size(), b.segments.size());
  for (std::size_t s = 0; s < a.segments.size(); ++s) {
    EXPECT_EQ(a.segments[s].slope, b.segments[s].slope);
    EXPECT_EQ(a.segments[s].intercept, b.segments[s].intercept);
  }
}

TEST(PwaReduce, SandwichGapAgreesWithScan) {
  const auto t = walk_from_anchor(make_chi(3), 1e-5, 0.9999);
  const auto pwa = pwa_reduce(t, 0.1);
  const auto gap = sandwich_gap(pwa, t);
  EXPECT_GE(gap.min_gap, 0.0);
  EXPECT_LE(gap.max_gap, 0.1);
  EXPECT_EQ(gap.max_gap, pwa.certified_error);
}

TEST(PwaReduce, CauchySegmentCountAtDefaultSettings) {
  const auto t = walk_from_anchor(make_std_cauchy(), 5e-6, 0.9999);
  const auto pwa = pwa_reduce(t, 0.1);
  expect_sandwich(pwa, t, 0.1);
  EXPECT_LE(pwa.segments.size(), 100u);
}

TEST(PwaEval, Examples) {
  PwaQuantile one;
  one.segments = {{2.0, 1.0}};
  one.p_lo = 0.0;
  one.p_hi = 1.0;
  EXPECT_EQ(pwa_eval(one, 0.5), 2.0);
  PwaQuantile two;
  two.segments = {{1.0, 0.0}, {3.0, -1.0}};
  two.p_lo = 0.0;
  two.p_hi = 1.0;
  EXPECT_DOUBLE_EQ(pwa_eval(two, 0.4), 0.4);
  EXPECT_DOUBLE_EQ(pwa_eval(two, 0.6), 0.8);
  EXPECT_THROW(pwa_eval(two, 1.1), std::out_of_range);
  EXPECT_THROW(pwa_eval(two, -0.1), std::out_of_range);
}
