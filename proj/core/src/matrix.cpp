#include "ownerrel/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ownerrel/error.hpp"

namespace ownerrel {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    fail(ErrorCode::kShape, std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    fail(ErrorCode::kShape, "Matrix: data length " + std::to_string(data_.size()) + " does not match " +
                                std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) fail(ErrorCode::kShape, "Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::row_vector(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

Matrix& Matrix::operator+=(const Matrix& o) {
  require_same_shape(*this, o, "add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  require_same_shape(*this, o, "sub");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) fail(ErrorCode::kShape, "matmul: " + shape_str(a) + " * " + shape_str(b));
  Matrix out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* dst = out.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* src = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) dst[j] += aik * src[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) fail(ErrorCode::kShape, "matmul_nt: " + shape_str(a) + " * T(" + shape_str(b) + ")");
  const std::size_t n = a.rows(), m = b.rows(), k = a.cols();
  Matrix out(n, m);
  if (n == 0 || m == 0 || k == 0) return out;
  // Blocked over the shared dimension; 3 rows of a against 4 rows of b per
  // pass, twelve running sums.
  constexpr std::size_t kBlock = 1024;
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t p0 = 0; p0 < k; p0 += kBlock) {
    const std::size_t len = std::min(k, p0 + kBlock) - p0;
    std::size_t j = 0;
    for (; j + 4 <= m; j += 4) {
      const double* b0 = pb + j * k + p0;
      const double* b1 = b0 + k;
      const double* b2 = b1 + k;
      const double* b3 = b2 + k;
      std::size_t i = 0;
      for (; i + 3 <= n; i += 3) {
        const double* x0 = pa + i * k + p0;
        const double* x1 = x0 + k;
        const double* x2 = x1 + k;
        double s00 = 0.0, s01 = 0.0, s02 = 0.0, s03 = 0.0;
        double s10 = 0.0, s11 = 0.0, s12 = 0.0, s13 = 0.0;
        double s20 = 0.0, s21 = 0.0, s22 = 0.0, s23 = 0.0;
#pragma omp simd reduction(+ : s00, s01, s02, s03, s10, s11, s12, s13, s20, s21, s22, s23)
        for (std::size_t p = 0; p < len; ++p) {
          const double u = x0[p], v = x1[p], w = x2[p];
          const double c0 = b0[p], c1 = b1[p], c2 = b2[p], c3 = b3[p];
          s00 += u * c0; s01 += u * c1; s02 += u * c2; s03 += u * c3;
          s10 += v * c0; s11 += v * c1; s12 += v * c2; s13 += v * c3;
          s20 += w * c0; s21 += w * c1; s22 += w * c2; s23 += w * c3;
        }
        double* o = po + i * m + j;
        o[0] += s00; o[1] += s01; o[2] += s02; o[3] += s03;
        o += m;
        o[0] += s10; o[1] += s11; o[2] += s12; o[3] += s13;
        o += m;
        o[0] += s20; o[1] += s21; o[2] += s22; o[3] += s23;
      }
      for (; i < n; ++i) {
        const double* ar = pa + i * k + p0;
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
#pragma omp simd reduction(+ : s0, s1, s2, s3)
        for (std::size_t p = 0; p < len; ++p) {
          const double x = ar[p];
          s0 += x * b0[p];
          s1 += x * b1[p];
          s2 += x * b2[p];
          s3 += x * b3[p];
        }
        double* o = po + i * m + j;
        o[0] += s0;
        o[1] += s1;
        o[2] += s2;
        o[3] += s3;
      }
    }
    for (; j < m; ++j) {
      const double* br = pb + j * k + p0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* ar = pa + i * k + p0;
        double acc = 0.0;
#pragma omp simd reduction(+ : acc)
        for (std::size_t p = 0; p < len; ++p) acc += ar[p] * br[p];
        po[i * m + j] += acc;
      }
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) fail(ErrorCode::kShape, "matmul_tn: T(" + shape_str(a) + ") * " + shape_str(b));
  Matrix out(a.cols(), b.cols());
  const std::size_t n = b.cols();
  // Column blocks keep the output slice resident while every row of b
  // passes over it.
  constexpr std::size_t kBlock = 1024;
  for (std::size_t j0 = 0; j0 < n; j0 += kBlock) {
    const std::size_t j1 = std::min(n, j0 + kBlock);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      double* dst = out.row(i).data();
      for (std::size_t r = 0; r < a.rows(); ++r) {
        const double ari = a(r, i);
        if (ari == 0.0) continue;
        const double* br = b.row(r).data();
        for (std::size_t j = j0; j < j1; ++j) dst[j] += ari * br[j];
      }
    }
  }
  return out;
}

Matrix relu(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.data()) v = std::max(0.0, v);
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.data()[i];
  return out;
}

std::vector<double> softmax(std::span<const double> v) {
  if (v.empty()) fail(ErrorCode::kShape, "softmax: empty input");
  const double peak = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - peak);
    total += out[i];
  }
  for (double& x : out) x /= total;
  return out;
}

std::vector<double> l2_normalize(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0)) fail(ErrorCode::kDegenerateVector, "l2_normalize: zero vector");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace ownerrel
