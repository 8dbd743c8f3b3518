#include "ccplan/kernels/kernels.hpp"

#include <algorithm>
#include <limits>

namespace ccplan::kernels::scalar {

void matvec_batch(const double* m, std::size_t rows, std::size_t cols,
                  const double* x, const double* add, double* out,
                  std::size_t lanes) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* o = out + r * lanes;
    for (std::size_t b = 0; b < lanes; ++b) {
      double acc = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        acc = acc + m[r * cols + c] * x[c * lanes + b];
      }
      if (add != nullptr) acc = acc + add[r * lanes + b];
      o[b] = acc;
    }
  }
}

void pair_distance_sq(const double* a, const double* c, const double* offset,
                      std::size_t dims, double* out, std::size_t lanes) {
  for (std::size_t b = 0; b < lanes; ++b) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
      const double diff = (offset[d] + a[d * lanes + b]) - c[d * lanes + b];
      acc = acc + diff * diff;
    }
    out[b] = acc;
  }
}

void pwa_envelope(const double* slopes, const double* intercepts,
                  std::size_t segments, const double* p, double* out,
                  std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < segments; ++s) {
      best = std::max(best, slopes[s] * p[i] + intercepts[s]);
    }
    out[i] = best;
  }
}

ChordExcess chord_excess(const double* p, const double* q, std::size_t count,
                         double slope, double intercept) {
  ChordExcess ex{-std::numeric_limits<double>::infinity(),
                 -std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < count; ++i) {
    const double diff = (slope * p[i] + intercept) - q[i];
    ex.above = std::max(ex.above, diff);
    ex.below = std::max(ex.below, -diff);
  }
  return ex;
}

}  // namespace ccplan::kernels::scalar
