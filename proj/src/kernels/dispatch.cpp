#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "ccplan/kernels/kernels.hpp"

namespace ccplan::kernels {
namespace {

// -1: automatic, otherwise a static_cast<int>(Isa).
std::atomic<int> g_forced{-1};

bool cpu_has_avx2() {
#if defined(CCPLAN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("CCPLAN_ISA")) {
    const std::string value(env);
    if (value == "scalar") return Isa::kScalar;
    if (value == "avx2" && isa_available(Isa::kAvx2)) return Isa::kAvx2;
  }
  return isa_available(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar;
}

void check_size(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("kernel size mismatch: ") + what);
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
      return cpu_has_avx2();
  }
  return false;
}

Isa active_isa() {
  const int forced = g_forced.load(std::memory_order_relaxed);
  if (forced >= 0) return static_cast<Isa>(forced);
  static const Isa detected = detect();
  return detected;
}

void force_isa(std::optional<Isa> isa) {
  if (!isa) {
    g_forced.store(-1);
    return;
  }
  if (!isa_available(*isa)) {
    throw std::invalid_argument("kernel variant not available: " +
                                std::string(to_string(*isa)));
  }
  g_forced.store(static_cast<int>(*isa));
}

void matvec_batch(std::span<const double> m, std::size_t rows, std::size_t cols,
                  std::span<const double> x, std::span<const double> add,
                  std::span<double> out, std::size_t lanes) {
  check_size(m.size() >= rows * cols, "matrix");
  check_size(x.size() >= cols * lanes, "input batch");
  check_size(add.empty() || add.size() >= rows * lanes, "addend batch");
  check_size(out.size() >= rows * lanes, "output batch");
  const double* add_ptr = add.empty() ? nullptr : add.data();
#if defined(CCPLAN_HAVE_AVX2)
  if (active_isa() == Isa::kAvx2) {
    avx2::matvec_batch(m.data(), rows, cols, x.data(), add_ptr, out.data(), lanes);
    return;
  }
#endif
  scalar::matvec_batch(m.data(), rows, cols, x.data(), add_ptr, out.data(), lanes);
}

void pair_distance_sq(std::span<const double> a, std::span<const double> c,
                      std::span<const double> offset, std::size_t dims,
                      std::span<double> out, std::size_t lanes) {
  check_size(a.size() >= dims * lanes && c.size() >= dims * lanes, "position batch");
  check_size(offset.size() >= dims, "offset");
  check_size(out.size() >= lanes, "output");
#if defined(CCPLAN_HAVE_AVX2)
  if (active_isa() == Isa::kAvx2) {
    avx2::pair_distance_sq(a.data(), c.data(), offset.data(), dims, out.data(), lanes);
    return;
  }
#endif
  scalar::pair_distance_sq(a.data(), c.data(), offset.data(), dims, out.data(), lanes);
}

void pwa_envelope(std::span<const double> slopes,
                  std::span<const double> intercepts, std::span<const double> p,
                  std::span<double> out) {
  check_size(slopes.size() == intercepts.size(), "segments");
  check_size(out.size() >= p.size(), "output");
#if defined(CCPLAN_HAVE_AVX2)
  if (active_isa() == Isa::kAvx2) {
    avx2::pwa_envelope(slopes.data(), intercepts.data(), slopes.size(), p.data(),
                       out.data(), p.size());
    return;
  }
#endif
  scalar::pwa_envelope(slopes.data(), intercepts.data(), slopes.size(), p.data(),
                       out.data(), p.size());
}

ChordExcess chord_excess(std::span<const double> p, std::span<const double> q,
                         double slope, double intercept) {
  check_size(p.size() == q.size(), "samples");
#if defined(CCPLAN_HAVE_AVX2)
  if (active_isa() == Isa::kAvx2) {
    return avx2::chord_excess(p.data(), q.data(), p.size(), slope, intercept);
  }
#endif
  return scalar::chord_excess(p.data(), q.data(), p.size(), slope, intercept);
}

}  // namespace ccplan::kernels
