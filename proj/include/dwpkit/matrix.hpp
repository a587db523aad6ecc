#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "dwpkit/errors.hpp"
#include "dwpkit/scalar.hpp"

namespace dwpkit {

// Dense row-major matrix over double or ad::Var.
template <Scalar T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, const T& fill = T(0.0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1.0);
    return m;
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeMismatch("from_rows: ragged initializer");
      std::size_t j = 0;
      for (double x : row) m(i, j++) = T(x);
      ++i;
    }
    return m;
  }

  static Matrix column(std::span<const T> xs) {
    Matrix m(xs.size(), 1);
    std::copy(xs.begin(), xs.end(), m.data_.begin());
    return m;
  }

  static Matrix diagonal(std::span<const T> xs) {
    Matrix m(xs.size(), xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) m(i, i) = xs[i];
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool is_square() const { return rows_ == cols_; }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<T> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const T> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  const std::vector<T>& storage() const { return data_; }

  Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    Matrix m(nr, nc);
    for (std::size_t i = 0; i < nr; ++i)
      for (std::size_t j = 0; j < nc; ++j) m(i, j) = (*this)(r0 + i, c0 + j);
    return m;
  }

  void set_block(std::size_t r0, std::size_t c0, const Matrix& b) {
    for (std::size_t i = 0; i < b.rows(); ++i)
      for (std::size_t j = 0; j < b.cols(); ++j) (*this)(r0 + i, c0 + j) = b(i, j);
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using DenseMatrix = Matrix<double>;

inline std::string shape_string(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

template <Scalar T>
void require_same_shape(const Matrix<T>& a, const Matrix<T>& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeMismatch(std::string(what) + ": " + shape_string(a.rows(), a.cols()) +
                        " vs " + shape_string(b.rows(), b.cols()));
  }
}

template <Scalar T>
Matrix<T> transpose(const Matrix<T>& a) {
  Matrix<T> t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

template <Scalar T>
Matrix<T> operator+(const Matrix<T>& a, const Matrix<T>& b) {
  require_same_shape(a, b, "matrix addition");
  Matrix<T> c = a;
  for (std::size_t k = 0; k < c.size(); ++k) c.data()[k] += b.data()[k];
  return c;
}

template <Scalar T>
Matrix<T> operator-(const Matrix<T>& a, const Matrix<T>& b) {
  require_same_shape(a, b, "matrix subtraction");
  Matrix<T> c = a;
  for (std::size_t k = 0; k < c.size(); ++k) c.data()[k] -= b.data()[k];
  return c;
}

template <Scalar T>
Matrix<T> operator*(const T& s, const Matrix<T>& a) {
  Matrix<T> c = a;
  for (std::size_t k = 0; k < c.size(); ++k) c.data()[k] = s * c.data()[k];
  return c;
}

inline Matrix<Var> operator*(double s, const Matrix<Var>& a) { return Var(s) * a; }

// a * b
template <Scalar T>
Matrix<T> operator*(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeMismatch("matrix product: " + shape_string(a.rows(), a.cols()) + " * " +
                        shape_string(b.rows(), b.cols()));
  }
  Matrix<T> c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      c(i, j) = dot_accumulate(T(0.0), a.data() + i * a.cols(), 1, b.data() + j, b.cols(),
                               a.cols(), 1.0);
  return c;
}

// a * b^T, exactly symmetric when a == b.
template <Scalar T>
Matrix<T> multiply_transposed(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.cols()) {
    throw ShapeMismatch("a*b^T: " + shape_string(a.rows(), a.cols()) + " vs " +
                        shape_string(b.rows(), b.cols()));
  }
  Matrix<T> c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j)
      c(i, j) = dot_accumulate(T(0.0), a.data() + i * a.cols(), 1, b.data() + j * b.cols(), 1,
                               a.cols(), 1.0);
  return c;
}

// a * a^T computed on the lower triangle and mirrored.
template <Scalar T>
Matrix<T> outer_gram(const Matrix<T>& a) {
  Matrix<T> c(a.rows(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      c(i, j) = dot_accumulate(T(0.0), a.data() + i * a.cols(), 1, a.data() + j * a.cols(), 1,
                               a.cols(), 1.0);
      c(j, i) = c(i, j);
    }
  return c;
}

template <Scalar T>
T trace(const Matrix<T>& a) {
  T s(0.0);
  for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) s += a(i, i);
  return s;
}

inline double max_abs(const DenseMatrix& a) {
  double m = 0.0;
  for (double x : a.storage()) m = std::max(m, std::abs(x));
  return m;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
  return m;
}

inline DenseMatrix values(const Matrix<Var>& a) {
  DenseMatrix m(a.rows(), a.cols());
  for (std::size_t k = 0; k < a.size(); ++k) m.data()[k] = a.data()[k].value();
  return m;
}
inline const DenseMatrix& values(const DenseMatrix& a) { return a; }

// Embeds a double matrix as constants of scalar type T.
template <Scalar T>
Matrix<T> lift(const DenseMatrix& a) {
  if constexpr (std::same_as<T, double>) {
    return a;
  } else {
    Matrix<T> m(a.rows(), a.cols());
    for (std::size_t k = 0; k < a.size(); ++k) m.data()[k] = T(a.data()[k]);
    return m;
  }
}

}  // namespace dwpkit
