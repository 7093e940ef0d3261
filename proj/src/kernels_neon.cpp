#include "kernels_dispatch.hpp"

#if defined(__aarch64__) || defined(_M_ARM64)

#include <arm_neon.h>

// NEON variants (2-wide float64). Same operation order as the scalar
// reference, no fused multiply-add.

namespace aquobs::kernels {
namespace {

void axpy_neon(double* y, double a, const double* x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t vy = vld1q_f64(y + i);
    vy = vaddq_f64(vy, vmulq_f64(va, vld1q_f64(x + i)));
    vst1q_f64(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_neon(double* y, double a, const double* x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmulq_f64(va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] = a * x[i];
}

double dot_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  double s = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void syr_full_neon(double* a, const double* v, std::size_t n) {
  for (std::size_t r = 0; r < n; ++r) {
    double* row = a + r * n;
    const double vr = v[r];
    const float64x2_t vvr = vdupq_n_f64(vr);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
      float64x2_t acc = vld1q_f64(row + i);
      acc = vaddq_f64(acc, vmulq_f64(vvr, vld1q_f64(v + i)));
      vst1q_f64(row + i, acc);
    }
    for (; i < n; ++i) row[i] += vr * v[i];
  }
}

std::size_t advect_react_neon(double* out, const double* a, const double* up,
                              const double* b, std::size_t n, double lambda,
                              double decay_dt, double mutual_dt) {
  const double keep = 1.0 - lambda;
  const float64x2_t vkeep = vdupq_n_f64(keep);
  const float64x2_t vlam = vdupq_n_f64(lambda);
  const float64x2_t vdecay = vdupq_n_f64(decay_dt);
  const float64x2_t vmut = vdupq_n_f64(mutual_dt);
  const float64x2_t vzero = vdupq_n_f64(0.0);
  std::size_t clamped = 0;
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t va = vld1q_f64(a + i);
    const float64x2_t vup = vld1q_f64(up + i);
    const float64x2_t vb = vld1q_f64(b + i);
    const float64x2_t adv = vaddq_f64(vmulq_f64(vkeep, va), vmulq_f64(vlam, vup));
    const float64x2_t react = vmulq_f64(vaddq_f64(vdecay, vmulq_f64(vmut, vb)), va);
    const float64x2_t v = vsubq_f64(adv, react);
    const uint64x2_t neg = vcltq_f64(v, vzero);
    clamped += (vgetq_lane_u64(neg, 0) != 0) + (vgetq_lane_u64(neg, 1) != 0);
    vst1q_f64(out + i, vbslq_f64(neg, vzero, v));
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

const Ops* neon_ops() {
  static const Ops ops{"neon",     axpy_neon,     scale_neon,
                       dot_neon,   syr_full_neon, advect_react_neon};
  return &ops;
}

}  // namespace aquobs::kernels

#endif  // aarch64
