#include "aquobs/kernels.hpp"

namespace aquobs::kernels {
namespace {

void axpy_scalar(double* y, double a, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double* y, double a, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i];
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void syr_full_scalar(double* a, const double* v, std::size_t n) {
  for (std::size_t r = 0; r < n; ++r) {
    double* row = a + r * n;
    const double vr = v[r];
    for (std::size_t i = 0; i < n; ++i) row[i] += vr * v[i];
  }
}

std::size_t advect_react_scalar(double* out, const double* a, const double* up,
                                const double* b, std::size_t n, double lambda,
                                double decay_dt, double mutual_dt) {
  const double keep = 1.0 - lambda;
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < n; ++i) {
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

const Ops& scalar() {
  static const Ops ops{"scalar",     axpy_scalar,     scale_scalar,
                       dot_scalar,   syr_full_scalar, advect_react_scalar};
  return ops;
}

}  // namespace aquobs::kernels
