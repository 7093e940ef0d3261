#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace aquobs {

// Dense row-major matrix of doubles. Rows are contiguous so the SIMD kernels
// can operate on them directly.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols) : rows_(rows), cols_(cols), d_(static_cast<std::size_t>(rows) * cols, 0.0) {}

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int r, int c) { return d_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return d_[static_cast<std::size_t>(r) * cols_ + c]; }

  double* row(int r) { return d_.data() + static_cast<std::size_t>(r) * cols_; }
  const double* row(int r) const { return d_.data() + static_cast<std::size_t>(r) * cols_; }

  double* data() { return d_.data(); }
  const double* data() const { return d_.data(); }
  std::size_t size() const { return d_.size(); }

  void set_zero() { d_.assign(d_.size(), 0.0); }

  Matrix& operator+=(const Matrix& o) {
    assert(rows_ == o.rows_ && cols_ == o.cols_);
    for (std::size_t i = 0; i < d_.size(); ++i) d_[i] += o.d_[i];
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) {
    a += b;
    return a;
  }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && d_ == o.d_;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : d_)
      if (v < 0 ? -v > m : v > m) m = v < 0 ? -v : v;
    return m;
  }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<double> d_;
};

}  // namespace aquobs
