#pragma once

#include <cstddef>
#include <vector>

// Data-parallel inner loops of the water-quality engine. Every kernel has a
// scalar reference implementation plus SIMD variants (AVX2 on x86-64, NEON on
// aarch64) selected once at startup from CPU capabilities. All variants of
// axpy/scale/advect_react/syr_full are bit-identical to the scalar reference:
// they perform the same elementwise operations in the same order and the
// build disables FP contraction. dot uses lane-partial accumulators and is
// only equivalent up to rounding.

namespace aquobs::kernels {

struct Ops {
  const char* name;

  // y[i] += a * x[i]
  void (*axpy)(double* y, double a, const double* x, std::size_t n);

  // y[i] = a * x[i]
  void (*scale)(double* y, double a, const double* x, std::size_t n);

  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);

  // A += v v^T for a row-major n-by-n matrix (full matrix, not triangle)
  void (*syr_full)(double* a, const double* v, std::size_t n);

  // Upwind advection plus reaction for one species over a run of pipe
  // segments:
  //
  //   out[i] = (1 - lambda) * a[i] + lambda * up[i]
  //            - (decay_dt + mutual_dt * b[i]) * a[i]
  //
  // clamped at zero. `a` is the advected species, `b` the co-species it
  // reacts with, `up` the upwind neighbour of each entry (caller aligns the
  // pointer for the flow direction). Returns the number of entries clamped
  // (value strictly negative before the clamp).
  std::size_t (*advect_react)(double* out, const double* a, const double* up,
                              const double* b, std::size_t n, double lambda,
                              double decay_dt, double mutual_dt);
};

// Scalar reference kernels; always available.
const Ops& scalar();

// Best variant for this machine. Honors AQUOBS_KERNELS={scalar,avx2,neon}
// as an override; unknown or unsupported values fall back to autodetection.
const Ops& active();

// Every variant usable on this machine (scalar first). Used by the
// equivalence tests.
std::vector<const Ops*> available();

}  // namespace aquobs::kernels
