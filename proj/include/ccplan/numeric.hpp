#pragma once

#include <functional>

namespace ccplan::numeric {

/// Adaptive Gauss-Kronrod quadrature of f over [a, b]; either bound may be
/// infinite. Relative tolerance `tol`.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-12);

/// Root of a monotone function on [lo, hi] by bisection, stopping once the
/// bracket is narrower than `xtol`. f(lo) and f(hi) must differ in sign.
double bisect(const std::function<double(double)>& f, double lo, double hi,
              double xtol);

}  // namespace ccplan::numeric
