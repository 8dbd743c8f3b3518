#pragma once

// Data-parallel inner loops shared by the quantile reducer and the Monte Carlo
// evaluator. Each kernel has a scalar reference implementation and, on x86, an
// AVX2 variant picked at runtime. All variants evaluate every lane with the
// same operation order and without fused multiply-add, so their results are
// bit-identical.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

namespace ccplan::kernels {

enum class Isa { kScalar, kAvx2 };

std::string_view to_string(Isa isa);

/// True if this binary carries the variant and the CPU can run it.
bool isa_available(Isa isa);

/// The variant used by the dispatching entry points. Honors force_isa() and
/// the CCPLAN_ISA environment variable ("scalar" or "avx2").
Isa active_isa();

/// Pins dispatch to one variant (tests, reproducibility runs); nullopt
/// restores automatic selection. Throws if the variant is unavailable.
void force_isa(std::optional<Isa> isa);

// Structure-of-arrays batches: a "rows x lanes" batch stores row r of lane b
// at data[r * lanes + b].

/// out[r][b] = sum_c m[r][c] * x[c][b] (+ add[r][b] if add is non-empty).
/// `m` is row-major rows x cols.
void matvec_batch(std::span<const double> m, std::size_t rows, std::size_t cols,
                  std::span<const double> x, std::span<const double> add,
                  std::span<double> out, std::size_t lanes);

/// out[b] = sum_d (offset[d] + a[d][b] - c[d][b])^2 for d < dims.
void pair_distance_sq(std::span<const double> a, std::span<const double> c,
                      std::span<const double> offset, std::size_t dims,
                      std::span<double> out, std::size_t lanes);

/// out[i] = max_q (slopes[q] * p[i] + intercepts[q]).
void pwa_envelope(std::span<const double> slopes,
                  std::span<const double> intercepts, std::span<const double> p,
                  std::span<double> out);

struct ChordExcess {
  double above;  // max over points of (chord - q)
  double below;  // max over points of (q - chord)
};

/// Signed extremes of the line slope * p + intercept against samples q.
ChordExcess chord_excess(std::span<const double> p, std::span<const double> q,
                         double slope, double intercept);

namespace scalar {
void matvec_batch(const double* m, std::size_t rows, std::size_t cols,
                  const double* x, const double* add, double* out,
                  std::size_t lanes);
void pair_distance_sq(const double* a, const double* c, const double* offset,
                      std::size_t dims, double* out, std::size_t lanes);
void pwa_envelope(const double* slopes, const double* intercepts,
                  std::size_t segments, const double* p, double* out,
                  std::size_t count);
ChordExcess chord_excess(const double* p, const double* q, std::size_t count,
                         double slope, double intercept);
}  // namespace scalar

#if defined(CCPLAN_HAVE_AVX2)
namespace avx2 {
void matvec_batch(const double* m, std::size_t rows, std::size_t cols,
                  const double* x, const double* add, double* out,
                  std::size_t lanes);
void pair_distance_sq(const double* a, const double* c, const double* offset,
                      std::size_t dims, double* out, std::size_t lanes);
void pwa_envelope(const double* slopes, const double* intercepts,
                  std::size_t segments, const double* p, double* out,
                  std::size_t count);
ChordExcess chord_excess(const double* p, const double* q, std::size_t count,
                         double slope, double intercept);
}  // namespace avx2
#endif

}  // namespace ccplan::kernels
