#include "ccplan/distributions.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

#include "ccplan/numeric.hpp"

namespace ccplan {
namespace {

constexpr double kPi = std::numbers::pi;

// Dense polynomial, coefficient i multiplies x^i.
struct Poly {
  std::vector<double> c;

  double operator()(double x) const {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
    return acc;
  }

  Poly derivative() const {
    if (c.size() <= 1) return Poly{{0.0}};
    Poly d{std::vector<double>(c.size() - 1)};
    for (std::size_t i = 1; i < c.size(); ++i) d.c[i - 1] = static_cast<double>(i) * c[i];
    return d;
  }
};

Poly operator+(const Poly& a, const Poly& b) {
  Poly r{std::vector<double>(std::max(a.c.size(), b.c.size()), 0.0)};
  for (std::size_t i = 0; i < a.c.size(); ++i) r.c[i] += a.c[i];
  for (std::size_t i = 0; i < b.c.size(); ++i) r.c[i] += b.c[i];
  return r;
}

Poly operator*(const Poly& a, const Poly& b) {
  Poly r{std::vector<double>(a.c.size() + b.c.size() - 1, 0.0)};
  for (std::size_t i = 0; i < a.c.size(); ++i)
    for (std::size_t j = 0; j < b.c.size(); ++j) r.c[i + j] += a.c[i] * b.c[j];
  return r;
}

Poly scaled(const Poly& a, double s) {
  Poly r = a;
  for (double& v : r.c) v *= s;
  return r;
}

// Densities of the form P_0(x) exp(-x^2/2): the d-th derivative is
// P_d(x) exp(-x^2/2) with P_{d+1} = P_d' - x P_d.
std::vector<Poly> gaussian_family_polys(Poly p0, int max_order) {
  std::vector<Poly> polys{std::move(p0)};
  const Poly x{{0.0, 1.0}};
  for (int d = 0; d < max_order; ++d) {
    polys.push_back(polys.back().derivative() + scaled(x * polys.back(), -1.0));
  }
  return polys;
}

// Cauchy density derivatives: N_d(x) / (pi (1+x^2)^(d+1)) with
// N_{d+1} = N_d' (1+x^2) - 2(d+1) x N_d.
std::vector<Poly> cauchy_polys(int max_order) {
  std::vector<Poly> polys{Poly{{1.0}}};
  const Poly one_plus_x2{{1.0, 0.0, 1.0}};
  const Poly x{{0.0, 1.0}};
  for (int d = 0; d < max_order; ++d) {
    const Poly& n = polys.back();
    polys.push_back(n.derivative() * one_plus_x2 +
                    scaled(x * n, -2.0 * static_cast<double>(d + 1)));
  }
  return polys;
}

// Derivatives of the density of |rho|, rho a 2-vector of iid standard Cauchy:
//   f(y) = 4y / (pi sqrt(1+y^2) (2+y^2)),  y >= 0
//   f^(d)(y) = N_d(y) / (pi (1+y^2)^((2d+1)/2) (2+y^2)^(d+1))
const std::array<Poly, 5>& cauchy_norm_polys() {
  static const std::array<Poly, 5> polys{
      Poly{{0.0, 4.0}},
      Poly{{8.0, 0.0, -4.0, 0.0, -8.0}},
      Poly{{0.0, -96.0, 0.0, -104.0, 0.0, 4.0, 0.0, 24.0}},
      Poly{{-192.0, 0.0, 624.0, 0.0, 1728.0, 0.0, 1164.0, 0.0, 96.0, 0.0, -96.0}},
      Poly{{0.0, 6720.0, 0.0, 6720.0, 0.0, -11424.0, 0.0, -22128.0, 0.0, -12204.0,
            0.0, -1440.0, 0.0, 480.0}},
  };
  return polys;
}

constexpr int kGaussianFamilyMaxOrder = 6;

double draw_uniform_open(Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  while (u <= 0.0) u = unif(rng);
  return u;
}

double cauchy_quantile(double p) { return std::tan(kPi * (p - 0.5)); }

double cauchy_norm_quantile(double p) {
  return std::sqrt(cauchy_norm2_squared::quantile(p));
}

}  // namespace

ScalarDistribution::ScalarDistribution(std::string name, DerivativeFn derivative,
                                       int max_order, Anchor anchor, Support support,
                                       SamplerFn sampler, QuantileFn analytic_quantile)
    : name_(std::move(name)),
      derivative_(std::move(derivative)),
      max_order_(max_order),
      anchor_(anchor),
      support_(support),
      sampler_(std::move(sampler)),
      quantile_(std::move(analytic_quantile)) {
  if (!derivative_ || !sampler_) {
    throw std::invalid_argument("distribution '" + name_ + "' needs a pdf and a sampler");
  }
  if (max_order_ < 1) {
    throw std::invalid_argument("distribution '" + name_ +
                                "': max_order must be at least 1");
  }
  if (!(anchor_.p > 0.0 && anchor_.p < 1.0) || !std::isfinite(anchor_.q)) {
    throw std::invalid_argument("distribution '" + name_ + "': anchor must have p in (0,1)");
  }
  if (!(support_.lower < support_.upper)) {
    throw std::invalid_argument("distribution '" + name_ + "': empty support");
  }
}

double ScalarDistribution::pdf_derivative(int order, double x) const {
  if (order < 0 || order > max_order_) {
    throw std::out_of_range("distribution '" + name_ + "': derivative order " +
                            std::to_string(order) + " not available");
  }
  return derivative_(order, x);
}

double ScalarDistribution::analytic_quantile(double p) const {
  if (!quantile_) {
    throw std::logic_error("distribution '" + name_ + "' has no analytic quantile");
  }
  return quantile_(p);
}

ScalarDistribution make_std_gaussian() {
  auto polys = std::make_shared<const std::vector<Poly>>(
      gaussian_family_polys(Poly{{1.0}}, kGaussianFamilyMaxOrder));
  const double norm = 1.0 / std::sqrt(2.0 * kPi);
  auto derivative = [polys, norm](int order, double x) {
    return norm * (*polys)[order](x) * std::exp(-0.5 * x * x);
  };
  auto sampler = [](Rng& rng) {
    // libstdc++ implements this with the Marsaglia polar method.
    std::normal_distribution<double> normal(0.0, 1.0);
    return normal(rng);
  };
  return ScalarDistribution("gaussian", derivative, kGaussianFamilyMaxOrder,
                            Anchor{0.5, 0.0}, Support{}, sampler);
}

ScalarDistribution make_chi(int k) {
  if (k != 2 && k != 3) {
    throw std::invalid_argument("make_chi: degrees of freedom k must be 2 or 3, got " +
                                std::to_string(k));
  }
  Poly leading{std::vector<double>(static_cast<std::size_t>(k), 0.0)};
  leading.c.back() = 1.0;
  auto polys = std::make_shared<const std::vector<Poly>>(
      gaussian_family_polys(leading, kGaussianFamilyMaxOrder));
  const double half_k = 0.5 * k;
  const double norm = 1.0 / (std::pow(2.0, half_k - 1.0) * std::tgamma(half_k));
  auto derivative = [polys, norm](int order, double x) {
    if (x < 0.0) return 0.0;
    return norm * (*polys)[order](x) * std::exp(-0.5 * x * x);
  };
  auto sampler = [k](Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    double acc = 0.0;
    for (int i = 0; i < k; ++i) {
      const double z = normal(rng);
      acc += z * z;
    }
    return std::sqrt(acc);
  };

  constexpr double kAnchorP = 0.9;
  // Provisional anchor to build a distribution we can integrate.
  const ScalarDistribution provisional("chi" + std::to_string(k), derivative,
                                       kGaussianFamilyMaxOrder, Anchor{kAnchorP, 1.0},
                                       Support{0.0, std::numeric_limits<double>::infinity()},
                                       sampler);
  const double q0 = numeric::bisect(
      [&](double x) { return detail::integrated_cdf(provisional, x) - kAnchorP; }, 0.0,
      20.0, 1e-9);
  return ScalarDistribution(provisional.name(), derivative, kGaussianFamilyMaxOrder,
                            Anchor{kAnchorP, q0},
                            Support{0.0, std::numeric_limits<double>::infinity()},
                            sampler);
}

ScalarDistribution make_std_cauchy() {
  auto polys = std::make_shared<const std::vector<Poly>>(
      cauchy_polys(kGaussianFamilyMaxOrder));
  auto derivative = [polys](int order, double x) {
    const double s = 1.0 + x * x;
    return (*polys)[order](x) / (kPi * std::pow(s, order + 1));
  };
  auto sampler = [](Rng& rng) { return cauchy_quantile(draw_uniform_open(rng)); };
  return ScalarDistribution("cauchy", derivative, kGaussianFamilyMaxOrder,
                            Anchor{0.5, 0.0}, Support{}, sampler, cauchy_quantile);
}

ScalarDistribution make_cauchy_norm2() {
  auto derivative = [](int order, double y) {
    if (y < 0.0) return 0.0;
    const double s = 1.0 + y * y;
    const double t = 2.0 + y * y;
    return cauchy_norm_polys()[order](y) /
           (kPi * std::pow(s, order + 0.5) * std::pow(t, order + 1));
  };
  auto sampler = [](Rng& rng) { return cauchy_norm_quantile(draw_uniform_open(rng)); };
  constexpr double kAnchorP = 0.9;
  return ScalarDistribution("cauchy_norm2", derivative, 4,
                            Anchor{kAnchorP, cauchy_norm_quantile(kAnchorP)},
                            Support{0.0, std::numeric_limits<double>::infinity()},
                            sampler, cauchy_norm_quantile);
}

namespace cauchy_norm2_squared {

double pdf(double x) {
  if (x < 0.0) return 0.0;
  return 2.0 / (kPi * std::sqrt(1.0 + x) * (2.0 + x));
}

double cdf(double x) {
  if (x < 0.0) return 0.0;
  return 4.0 / kPi * std::atan(std::sqrt(1.0 + x)) - 1.0;
}

double quantile(double p) {
  const double t = std::tan(0.25 * kPi * (1.0 + p));
  return t * t - 1.0;
}

}  // namespace cauchy_norm2_squared

std::vector<double> sample(const ScalarDistribution& dist, Rng& rng, long count) {
  if (count < 1) {
    throw std::invalid_argument("sample: count must be at least 1");
  }
  std::vector<double> out(static_cast<std::size_t>(count));
  for (double& v : out) v = dist.draw(rng);
  return out;
}

DistributionPtr builtin_distribution(const std::string& name) {
  if (name == "gaussian") return std::make_shared<const ScalarDistribution>(make_std_gaussian());
  if (name == "chi2") return std::make_shared<const ScalarDistribution>(make_chi(2));
  if (name == "chi3") return std::make_shared<const ScalarDistribution>(make_chi(3));
  if (name == "cauchy") return std::make_shared<const ScalarDistribution>(make_std_cauchy());
  if (name == "cauchy_norm2") {
    return std::make_shared<const ScalarDistribution>(make_cauchy_norm2());
  }
  throw std::invalid_argument("unknown distribution '" + name + "'");
}

namespace detail {

double integrated_cdf(const ScalarDistribution& dist, double x) {
  const Support& sup = dist.support();
  if (x <= sup.lower) return 0.0;
  const double upper = std::min(x, sup.upper);
  auto pdf = [&](double t) { return dist.pdf(t); };
  if (std::isfinite(sup.lower)) return numeric::integrate(pdf, sup.lower, upper);
  // Split at zero so the infinite piece stays smooth for the transform.
  if (upper <= 0.0) return numeric::integrate(pdf, -std::numeric_limits<double>::infinity(), upper);
  return numeric::integrate(pdf, -std::numeric_limits<double>::infinity(), 0.0) +
         numeric::integrate(pdf, 0.0, upper);
}

}  // namespace detail
}  // namespace ccplan
