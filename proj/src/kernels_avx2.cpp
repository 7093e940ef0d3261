#include "kernels_dispatch.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

// AVX2 variants. Separate mul/add (no FMA) so each lane rounds exactly like
// the scalar reference; the tail loops repeat the scalar expressions.

namespace aquobs::kernels {
namespace {

void axpy_avx2(double* y, double a, const double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    __m256d vx = _mm256_loadu_pd(x + i);
    vy = _mm256_add_pd(vy, _mm256_mul_pd(va, vx));
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(double* y, double a, const double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = a * x[i];
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(acc,
                        _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void syr_full_avx2(double* a, const double* v, std::size_t n) {
  for (std::size_t r = 0; r < n; ++r) {
    double* row = a + r * n;
    const double vr = v[r];
    const __m256d vvr = _mm256_set1_pd(vr);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
      __m256d acc = _mm256_loadu_pd(row + i);
      acc = _mm256_add_pd(acc, _mm256_mul_pd(vvr, _mm256_loadu_pd(v + i)));
      _mm256_storeu_pd(row + i, acc);
    }
    for (; i < n; ++i) row[i] += vr * v[i];
  }
}

std::size_t advect_react_avx2(double* out, const double* a, const double* up,
                              const double* b, std::size_t n, double lambda,
                              double decay_dt, double mutual_dt) {
  const double keep = 1.0 - lambda;
  const __m256d vkeep = _mm256_set1_pd(keep);
  const __m256d vlam = _mm256_set1_pd(lambda);
  const __m256d vdecay = _mm256_set1_pd(decay_dt);
  const __m256d vmut = _mm256_set1_pd(mutual_dt);
  const __m256d vzero = _mm256_setzero_pd();
  std::size_t clamped = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d va = _mm256_loadu_pd(a + i);
    const __m256d vup = _mm256_loadu_pd(up + i);
    const __m256d vb = _mm256_loadu_pd(b + i);
    const __m256d adv =
        _mm256_add_pd(_mm256_mul_pd(vkeep, va), _mm256_mul_pd(vlam, vup));
    const __m256d react =
        _mm256_mul_pd(_mm256_add_pd(vdecay, _mm256_mul_pd(vmut, vb)), va);
    const __m256d v = _mm256_sub_pd(adv, react);
    const __m256d neg = _mm256_cmp_pd(v, vzero, _CMP_LT_OQ);
    clamped += static_cast<std::size_t>(__builtin_popcount(_mm256_movemask_pd(neg)));
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(v, vzero, neg));
  }
  for (; i < n; ++i) {
    const double adv = keep * a[i] + lambda * up[i];
    const double react = (decay_dt + mutual_dt * b[i]) * a[i];
    const double v = adv - react;
    if (v < 0.0) {
      out[i] = 0.0;
      ++clamped;
    } else {
      out[i] = v;
    }
  }
  return clamped;
}

}  // namespace

const Ops* avx2_ops() {
#if defined(__GNUC__) || defined(__clang__)
  if (!__builtin_cpu_supports("avx2")) return nullptr;
#endif
  static const Ops ops{"avx2",     axpy_avx2,     scale_avx2,
                       dot_avx2,   syr_full_avx2, advect_react_avx2};
  return &ops;
}

}  // namespace aquobs::kernels

#endif  // x86-64
