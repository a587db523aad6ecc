#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dwpkit/errors.hpp"
#include "dwpkit/matrix.hpp"

namespace dwpkit::linalg {

// Square matrix with exact zeros strictly above the diagonal.
template <Scalar T>
class LowerTriangular {
 public:
  LowerTriangular() = default;
  explicit LowerTriangular(Matrix<T> m) : m_(std::move(m)) {
    if (!m_.is_square()) {
      throw ShapeMismatch("LowerTriangular: matrix is " + shape_string(m_.rows(), m_.cols()));
    }
    for (std::size_t i = 0; i < m_.rows(); ++i)
      for (std::size_t j = i + 1; j < m_.cols(); ++j)
        if (value(m_(i, j)) != 0.0) {
          throw DomainError("LowerTriangular: nonzero entry above the diagonal at (" +
                            std::to_string(i) + "," + std::to_string(j) + ")");
        }
  }

  static LowerTriangular identity(std::size_t n) {
    return LowerTriangular(Matrix<T>::identity(n));
  }

  std::size_t dim() const { return m_.rows(); }
  const T& operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  const Matrix<T>& matrix() const { return m_; }

  bool invertible() const {
    for (std::size_t i = 0; i < dim(); ++i)
      if (value(m_(i, i)) == 0.0) return false;
    return true;
  }

 private:
  struct Trusted {};
  LowerTriangular(Matrix<T> m, Trusted) : m_(std::move(m)) {}
  template <Scalar U>
  friend LowerTriangular<U> trusted_lower(Matrix<U> m);

  Matrix<T> m_;
};

// Skips the structural scan for factors produced by the routines below.
template <Scalar T>
LowerTriangular<T> trusted_lower(Matrix<T> m) {
  return LowerTriangular<T>(std::move(m), typename LowerTriangular<T>::Trusted{});
}

// Symmetric matrix intended to be positive semi-definite. Only the lower
// triangle is read by the factorisations; PSD-ness is established by them.
template <Scalar T>
class SymmetricPsd {
 public:
  static constexpr double kSymmetryTolerance = 1e-10;

  SymmetricPsd() = default;
  explicit SymmetricPsd(Matrix<T> m, std::optional<std::size_t> rank_bound = std::nullopt)
      : m_(std::move(m)), rank_bound_(rank_bound) {
    if (!m_.is_square()) {
      throw ShapeMismatch("SymmetricPsd: matrix is " + shape_string(m_.rows(), m_.cols()));
    }
    for (std::size_t i = 0; i < m_.rows(); ++i)
      for (std::size_t j = 0; j < i; ++j) {
        const double a = value(m_(i, j));
        const double b = value(m_(j, i));
        if (!std::isfinite(a) || !std::isfinite(b)) {
          throw DomainError("SymmetricPsd: non-finite entry");
        }
        if (std::abs(a - b) > kSymmetryTolerance) {
          throw DomainError("SymmetricPsd: asymmetric at (" + std::to_string(i) + "," +
                            std::to_string(j) + ")");
        }
      }
  }

  std::size_t dim() const { return m_.rows(); }
  const T& operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  const Matrix<T>& matrix() const { return m_; }
  std::optional<std::size_t> rank_bound() const { return rank_bound_; }

 private:
  Matrix<T> m_;
  std::optional<std::size_t> rank_bound_;
};

// (m + m^T) / 2, for matrices that are symmetric up to round-off.
template <Scalar T>
SymmetricPsd<T> symmetrize(const Matrix<T>& m) {
  Matrix<T> s(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      s(i, j) = 0.5 * (m(i, j) + m(j, i));
      s(j, i) = s(i, j);
    }
  return SymmetricPsd<T>(std::move(s));
}

// Diagonal jitter levels tried in order, each scaled by the mean diagonal.
struct JitterPolicy {
  std::vector<double> levels{0.0, 1e-10, 1e-8, 1e-6, 1e-4};

  static JitterPolicy none() { return JitterPolicy{{0.0}}; }
};

template <Scalar T>
struct Cholesky {
  LowerTriangular<T> factor;
  double jitter = 0.0;
};

inline double mean_diagonal_scale(double sum, std::size_t n) {
  const double s = n == 0 ? 0.0 : sum / static_cast<double>(n);
  return (s > 0.0 && std::isfinite(s)) ? s : 1.0;
}

template <Scalar T>
Cholesky<T> cholesky_jittered(const SymmetricPsd<T>& m, const JitterPolicy& policy = {}) {
  const std::size_t n = m.dim();
  if (n == 0) throw ShapeMismatch("cholesky: empty matrix");
  double diag_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) diag_sum += value(m(i, i));
  const double scale = mean_diagonal_scale(diag_sum, n);
  const double tol = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * scale;

  for (double level : policy.levels) {
    const double jitter = level * scale;
    Matrix<T> l(n, n);
    bool ok = true;
    for (std::size_t j = 0; j < n && ok; ++j) {
      const T d = dot_accumulate(m(j, j) + T(jitter), l.data() + j * n, 1, l.data() + j * n, 1,
                                 j, -1.0);
      if (!(value(d) > tol)) {
        ok = false;
        break;
      }
      const T ljj = sqrt(d);
      l(j, j) = ljj;
      for (std::size_t i = j + 1; i < n; ++i) {
        l(i, j) = dot_accumulate(m(i, j), l.data() + i * n, 1, l.data() + j * n, 1, j, -1.0) / ljj;
      }
    }
    if (ok) return {trusted_lower(std::move(l)), jitter};
  }
  throw FactorizationFailure("cholesky: matrix of dimension " + std::to_string(n) +
                             " is not positive definite at any jitter level");
}

template <Scalar T>
LowerTriangular<T> cholesky(const SymmetricPsd<T>& m, const JitterPolicy& policy = {}) {
  return cholesky_jittered(m, policy).factor;
}

// Unpivoted factor truncated at min(nu, P) columns: m = L L^T for rank-nu m.
template <Scalar T>
Matrix<T> rank_cholesky(const SymmetricPsd<T>& m, std::size_t nu) {
  const std::size_t p = m.dim();
  if (p == 0 || nu == 0) throw ShapeMismatch("rank_cholesky: empty input");
  const std::size_t k = std::min(nu, p);
  double tr = 0.0;
  for (std::size_t i = 0; i < p; ++i) tr += value(m(i, i));
  const double threshold = 1e-12 * tr / static_cast<double>(p);

  Matrix<T> l(p, k);
  for (std::size_t j = 0; j < k; ++j) {
    const T d = dot_accumulate(m(j, j), l.data() + j * k, 1, l.data() + j * k, 1, j, -1.0);
    if (!(value(d) >= threshold) || !(value(d) > 0.0)) {
      throw RankDeficiency("rank_cholesky: pivot " + std::to_string(value(d)) + " at column " +
                           std::to_string(j) + " below threshold " + std::to_string(threshold));
    }
    const T ljj = sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < p; ++i) {
      l(i, j) = dot_accumulate(m(i, j), l.data() + i * k, 1, l.data() + j * k, 1, j, -1.0) / ljj;
    }
  }
  return l;
}

// Solves L X = rhs, or L^T X = rhs when `transposed`.
template <Scalar T>
Matrix<T> tri_solve(const LowerTriangular<T>& lower, const Matrix<T>& rhs, bool transposed = false) {
  const std::size_t n = lower.dim();
  if (rhs.rows() != n) {
    throw ShapeMismatch("tri_solve: factor is " + shape_string(n, n) + ", rhs is " +
                        shape_string(rhs.rows(), rhs.cols()));
  }
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(value(lower(i, i))) < 1e-300) {
      throw Singular("tri_solve: zero diagonal at " + std::to_string(i));
    }
  const std::size_t c = rhs.cols();
  const T* l = lower.matrix().data();
  Matrix<T> x(n, c);
  if (!transposed) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t col = 0; col < c; ++col)
        x(i, col) = dot_accumulate(rhs(i, col), l + i * n, 1, x.data() + col, c, i, -1.0) /
                    lower(i, i);
  } else {
    for (std::size_t i = n; i-- > 0;)
      for (std::size_t col = 0; col < c; ++col)
        x(i, col) = dot_accumulate(rhs(i, col), l + (i + 1) * n + i, n,
                                   x.data() + (i + 1) * c + col, c, n - i - 1, -1.0) /
                    lower(i, i);
  }
  return x;
}

template <Scalar T>
T log_det_triangular(const LowerTriangular<T>& lower) {
  T s(0.0);
  for (std::size_t i = 0; i < lower.dim(); ++i) {
    if (!(value(lower(i, i)) > 0.0)) {
      throw NonPositiveDiagonal("log_det_triangular: diagonal entry " + std::to_string(i) +
                                " is " + std::to_string(value(lower(i, i))));
    }
    s += log(lower(i, i));
  }
  return s;
}

// log Gamma_p(a) = p(p-1)/4 log(pi) + sum_{j=1..p} log Gamma(a + (1-j)/2)
inline double log_multivariate_gamma(std::size_t p, double a) {
  const double pd = static_cast<double>(p);
  if (p == 0 || !(a > (pd - 1.0) / 2.0)) {
    throw DomainError("log_multivariate_gamma: need a > (p-1)/2, got p=" + std::to_string(p) +
                      " a=" + std::to_string(a));
  }
  double s = pd * (pd - 1.0) / 4.0 * std::log(std::numbers::pi);
  for (std::size_t j = 1; j <= p; ++j) s += std::lgamma(a + (1.0 - static_cast<double>(j)) / 2.0);
  return s;
}

// LU factorisation with partial pivoting, P A = L U packed into one matrix.
template <Scalar T>
struct LuDecomposition {
  Matrix<T> lu;
  std::vector<std::size_t> perm;  // row i of P A is row perm[i] of A
  int sign = 1;
};

template <Scalar T>
LuDecomposition<T> lu_decompose(const Matrix<T>& a) {
  if (!a.is_square()) throw ShapeMismatch("lu_decompose: matrix is not square");
  const std::size_t n = a.rows();
  LuDecomposition<T> f{a, std::vector<std::size_t>(n), 1};
  for (std::size_t i = 0; i < n; ++i) f.perm[i] = i;
  Matrix<T>& m = f.lu;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(value(m(i, k))) > std::abs(value(m(piv, k)))) piv = i;
    if (!(std::abs(value(m(piv, k))) > 1e-300)) {
      throw Singular("lu_decompose: matrix is singular at column " + std::to_string(k));
    }
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m(k, j), m(piv, j));
      std::swap(f.perm[k], f.perm[piv]);
      f.sign = -f.sign;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      m(i, k) = m(i, k) / m(k, k);
    }
    for (std::size_t i = k + 1; i < n; ++i)
      for (std::size_t j = k + 1; j < n; ++j) m(i, j) = m(i, j) - m(i, k) * m(k, j);
  }
  return f;
}

template <Scalar T>
T log_abs_det(const LuDecomposition<T>& f) {
  T s(0.0);
  for (std::size_t i = 0; i < f.lu.rows(); ++i) s += log(abs(f.lu(i, i)));
  return s;
}

template <Scalar T>
T log_abs_det(const Matrix<T>& a) {
  return log_abs_det(lu_decompose(a));
}

// Solves A X = rhs from a factorisation of A.
template <Scalar T>
Matrix<T> lu_solve(const LuDecomposition<T>& f, const Matrix<T>& rhs) {
  const std::size_t n = f.lu.rows();
  if (rhs.rows() != n) throw ShapeMismatch("lu_solve: incompatible right-hand side");
  const std::size_t c = rhs.cols();
  Matrix<T> x(n, c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t col = 0; col < c; ++col)
      x(i, col) =
          dot_accumulate(rhs(f.perm[i], col), f.lu.data() + i * n, 1, x.data() + col, c, i, -1.0);
  for (std::size_t i = n; i-- > 0;)
    for (std::size_t col = 0; col < c; ++col)
      x(i, col) = dot_accumulate(x(i, col), f.lu.data() + i * n + i + 1, 1,
                                 x.data() + (i + 1) * c + col, c, n - i - 1, -1.0) /
                  f.lu(i, i);
  return x;
}

}  // namespace dwpkit::linalg
