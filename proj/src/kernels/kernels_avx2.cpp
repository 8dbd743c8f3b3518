// Compiled with -mavx2 only (no -mfma): every lane performs the same
// multiply-then-add sequence as the scalar reference.

#include <immintrin.h>

#include <algorithm>
#include <limits>

#include "ccplan/kernels/kernels.hpp"

namespace ccplan::kernels::avx2 {
namespace {

constexpr std::size_t kWidth = 4;

double hmax(__m256d v) {
  alignas(32) double buf[kWidth];
  _mm256_store_pd(buf, v);
  return std::max(std::max(buf[0], buf[1]), std::max(buf[2], buf[3]));
}

__m256d negate(__m256d v) { return _mm256_xor_pd(v, _mm256_set1_pd(-0.0)); }

}  // namespace

void matvec_batch(const double* m, std::size_t rows, std::size_t cols,
                  const double* x, const double* add, double* out,
                  std::size_t lanes) {
  const std::size_t vec_end = lanes - lanes % kWidth;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* mr = m + r * cols;
    double* o = out + r * lanes;
    std::size_t b = 0;
    for (; b < vec_end; b += kWidth) {
      __m256d acc = _mm256_setzero_pd();
      for (std::size_t c = 0; c < cols; ++c) {
        const __m256d xv = _mm256_loadu_pd(x + c * lanes + b);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(mr[c]), xv));
      }
      if (add != nullptr) {
        acc = _mm256_add_pd(acc, _mm256_loadu_pd(add + r * lanes + b));
      }
      _mm256_storeu_pd(o + b, acc);
    }
    for (; b < lanes; ++b) {
      double acc = 0.0;
      for (std::size_t c = 0; c < cols; ++c) acc = acc + mr[c] * x[c * lanes + b];
      if (add != nullptr) acc = acc + add[r * lanes + b];
      o[b] = acc;
    }
  }
}

void pair_distance_sq(const double* a, const double* c, const double* offset,
                      std::size_t dims, double* out, std::size_t lanes) {
  const std::size_t vec_end = lanes - lanes % kWidth;
  std::size_t b = 0;
  for (; b < vec_end; b += kWidth) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t d = 0; d < dims; ++d) {
      const __m256d lhs =
          _mm256_add_pd(_mm256_set1_pd(offset[d]), _mm256_loadu_pd(a + d * lanes + b));
      const __m256d diff = _mm256_sub_pd(lhs, _mm256_loadu_pd(c + d * lanes + b));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
    }
    _mm256_storeu_pd(out + b, acc);
  }
  for (; b < lanes; ++b) {
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
  const std::size_t vec_end = count - count % kWidth;
  std::size_t i = 0;
  for (; i < vec_end; i += kWidth) {
    const __m256d pv = _mm256_loadu_pd(p + i);
    __m256d best = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
    for (std::size_t s = 0; s < segments; ++s) {
      const __m256d line = _mm256_add_pd(
          _mm256_mul_pd(_mm256_set1_pd(slopes[s]), pv), _mm256_set1_pd(intercepts[s]));
      best = _mm256_max_pd(best, line);
    }
    _mm256_storeu_pd(out + i, best);
  }
  for (; i < count; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < segments; ++s) {
      best = std::max(best, slopes[s] * p[i] + intercepts[s]);
    }
    out[i] = best;
  }
}

ChordExcess chord_excess(const double* p, const double* q, std::size_t count,
                         double slope, double intercept) {
  const __m256d sv = _mm256_set1_pd(slope);
  const __m256d cv = _mm256_set1_pd(intercept);
  __m256d above = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
  __m256d below = above;
  const std::size_t vec_end = count - count % kWidth;
  std::size_t i = 0;
  for (; i < vec_end; i += kWidth) {
    const __m256d chord = _mm256_add_pd(_mm256_mul_pd(sv, _mm256_loadu_pd(p + i)), cv);
    const __m256d diff = _mm256_sub_pd(chord, _mm256_loadu_pd(q + i));
    above = _mm256_max_pd(above, diff);
    below = _mm256_max_pd(below, negate(diff));
  }
  ChordExcess ex{hmax(above), hmax(below)};
  for (; i < count; ++i) {
    const double diff = (slope * p[i] + intercept) - q[i];
    ex.above = std::max(ex.above, diff);
    ex.below = std::max(ex.below, -diff);
  }
  return ex;
}

}  // namespace ccplan::kernels::avx2
