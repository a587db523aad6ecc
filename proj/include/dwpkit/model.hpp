#pragma once

// Deep Wishart process building blocks: squared-exponential kernels computed
// from inputs or Gram matrices, the per-layer Wishart prior, conditional
// feature propagation and the Gaussian output likelihood.

#include <cstddef>
#include <vector>

#include "dwpkit/distributions.hpp"
#include "dwpkit/linalg.hpp"
#include "dwpkit/matrix.hpp"
#include "dwpkit/random.hpp"
#include "dwpkit/special.hpp"

namespace dwpkit::model {

using linalg::LowerTriangular;
using linalg::SymmetricPsd;

template <Scalar T>
struct KernelConfig {
  T variance = T(1.0);
  std::vector<T> lengthscales{T(1.0)};

  void validate() const {
    if (lengthscales.empty()) throw ShapeMismatch("kernel: no lengthscales");
    if (!(value(variance) > 0.0)) throw DomainError("kernel: variance must be positive");
    for (const T& l : lengthscales)
      if (!(value(l) > 0.0)) throw DomainError("kernel: lengthscales must be positive");
  }
};

struct DWPConfig {
  std::size_t depth = 2;               // hidden Wishart layers
  std::vector<std::size_t> widths;     // nu per hidden layer
  std::size_t inducing_count = 8;
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  double noise_variance = 0.1;         // initial value
  double kernel_variance = 1.0;        // initial value, every layer
  double kernel_lengthscale = 1.0;     // initial value, every layer

  void validate() const {
    if (widths.size() != depth) throw ConfigError("model: widths must have one entry per layer");
    for (std::size_t w : widths)
      if (w == 0) throw ConfigError("model: widths must be >= 1");
    if (inducing_count == 0) throw ConfigError("model: inducing_count must be >= 1");
    if (input_dim == 0 || output_dim == 0) throw ConfigError("model: empty input or output");
    if (!(noise_variance > 0.0) || !(kernel_variance > 0.0) || !(kernel_lengthscale > 0.0)) {
      throw ConfigError("model: noise and kernel hyperparameters must be positive");
    }
  }
};

// Feature rows split into inducing rows [0, inducing) and the rest.
template <Scalar T>
struct FeatureBlock {
  Matrix<T> F;
  std::size_t inducing = 0;

  Matrix<T> inducing_rows() const { return F.block(0, 0, inducing, F.cols()); }
  Matrix<T> other_rows() const { return F.block(inducing, 0, F.rows() - inducing, F.cols()); }
};

// R_ij = G_ii - 2 G_ij + G_jj, clamped at zero, with an exactly zero diagonal.
template <Scalar T>
Matrix<T> sqdist_from_gram(const Matrix<T>& g) {
  if (!g.is_square()) throw ShapeMismatch("sqdist_from_gram: G is not square");
  const std::size_t n = g.rows();
  Matrix<T> r(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      T d = g(i, i) + g(j, j) - 2.0 * g(i, j);
      if (value(d) < 0.0) d = T(0.0);
      r(i, j) = d;
      r(j, i) = d;
    }
  return r;
}

template <Scalar T>
Matrix<T> sqdist_from_gram(const SymmetricPsd<T>& g) {
  return sqdist_from_gram(g.matrix());
}

// Matrix form used inside the inference engine, skipping validation.
template <Scalar T>
Matrix<T> kernel_matrix_from_gram(const Matrix<T>& g, const KernelConfig<T>& cfg) {
  const Matrix<T> r = sqdist_from_gram(g);
  const std::size_t n = r.rows();
  const T scale = -0.5 / (cfg.lengthscales[0] * cfg.lengthscales[0]);
  Matrix<T> k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    k(i, i) = cfg.variance;
    for (std::size_t j = 0; j < i; ++j) {
      k(i, j) = cfg.variance * exp(scale * r(i, j));
      k(j, i) = k(i, j);
    }
  }
  return k;
}

template <Scalar T>
SymmetricPsd<T> kernel_from_gram(const SymmetricPsd<T>& g, const KernelConfig<T>& cfg) {
  cfg.validate();
  if (cfg.lengthscales.size() != 1) throw ShapeMismatch("kernel_from_gram: expects one lengthscale");
  return SymmetricPsd<T>(kernel_matrix_from_gram(g.matrix(), cfg));
}

// ARD squared exponential over input rows.
template <Scalar T>
Matrix<T> kernel_matrix_ard(const Matrix<T>& x, const KernelConfig<T>& cfg) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (cfg.lengthscales.size() != d) {
    throw ShapeMismatch("kernel_ard_inputs: " + std::to_string(cfg.lengthscales.size()) +
                        " lengthscales for " + std::to_string(d) + " features");
  }
  Matrix<T> scaled(n, d);
  for (std::size_t c = 0; c < d; ++c) {
    const T inv = 1.0 / cfg.lengthscales[c];
    for (std::size_t i = 0; i < n; ++i) scaled(i, c) = x(i, c) * inv;
  }
  Matrix<T> k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    k(i, i) = cfg.variance;
    for (std::size_t j = 0; j < i; ++j) {
      T s(0.0);
      for (std::size_t c = 0; c < d; ++c) {
        const T diff = scaled(i, c) - scaled(j, c);
        s += diff * diff;
      }
      k(i, j) = cfg.variance * exp(-0.5 * s);
      k(j, i) = k(i, j);
    }
  }
  return k;
}

template <Scalar T>
SymmetricPsd<T> kernel_ard_inputs(const Matrix<T>& x, const KernelConfig<T>& cfg) {
  cfg.validate();
  return SymmetricPsd<T>(kernel_matrix_ard(x, cfg));
}

// log W(G_ell; K(G_prev)/nu, nu).
template <Scalar T>
T layer_prior_logpdf(const SymmetricPsd<T>& g_ell, const SymmetricPsd<T>& g_prev, std::size_t nu,
                     const KernelConfig<T>& cfg) {
  const Matrix<T> s = (1.0 / static_cast<double>(nu)) * kernel_matrix_from_gram(g_prev.matrix(), cfg);
  return dist::log_density_wishart(g_ell, linalg::cholesky(SymmetricPsd<T>(s)), nu);
}

inline double layer_prior_logpdf(const dist::GramSample& g_ell, const SymmetricPsd<double>& g_prev,
                                 std::size_t nu, const KernelConfig<double>& cfg) {
  return layer_prior_logpdf(g_ell.G, g_prev, nu, cfg);
}

// Conditional Gaussian of the non-inducing rows given the inducing rows,
// precomputed from the joint covariance S.
template <Scalar T>
struct FeatureConditional {
  LowerTriangular<T> chol_ii;  // chol(S_ii)
  Matrix<T> w;                 // chol_ii^-1 S_it
  LowerTriangular<T> chol_cond;  // chol(S_tt - S_ti S_ii^-1 S_it)
};

template <Scalar T>
FeatureConditional<T> feature_conditional(const Matrix<T>& s, std::size_t inducing,
                                          const linalg::JitterPolicy& jitter = {}) {
  const std::size_t n = s.rows();
  if (!s.is_square() || inducing == 0 || inducing >= n) {
    throw ShapeMismatch("feature_conditional: need 0 < inducing < rows");
  }
  const std::size_t m = n - inducing;
  FeatureConditional<T> c;
  c.chol_ii = linalg::cholesky(SymmetricPsd<T>(s.block(0, 0, inducing, inducing)), jitter);
  c.w = linalg::tri_solve(c.chol_ii, s.block(0, inducing, inducing, m));
  Matrix<T> cond = s.block(inducing, inducing, m, m);
  const Matrix<T> wtw = outer_gram(transpose(c.w));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) cond(i, j) = cond(i, j) - wtw(i, j);
  c.chol_cond = linalg::cholesky(linalg::symmetrize(cond), jitter);
  return c;
}

// F_t = S_ti S_ii^-1 F_i + chol(S_tt.i) E for a given standard-normal E.
template <Scalar T>
Matrix<T> conditional_features(const FeatureConditional<T>& c, const Matrix<T>& f_i,
                               const Matrix<T>& noise) {
  const Matrix<T> mean = transpose(c.w) * linalg::tri_solve(c.chol_ii, f_i);
  if (noise.rows() != mean.rows() || noise.cols() != mean.cols()) {
    throw ShapeMismatch("conditional_features: noise is " + shape_string(noise.rows(), noise.cols()) +
                        ", expected " + shape_string(mean.rows(), mean.cols()));
  }
  return mean + c.chol_cond.matrix() * noise;
}

inline FeatureBlock<double> conditional_feature_sample(const SymmetricPsd<double>& s,
                                                       const FeatureBlock<double>& f_i,
                                                       RandomStream& rng) {
  const std::size_t inducing = f_i.F.rows();
  const auto c = feature_conditional(s.matrix(), inducing);
  DenseMatrix e(s.dim() - inducing, f_i.F.cols());
  for (std::size_t i = 0; i < e.rows(); ++i)
    for (std::size_t j = 0; j < e.cols(); ++j) e(i, j) = rng.normal();
  DenseMatrix full(s.dim(), f_i.F.cols());
  full.set_block(0, 0, f_i.F);
  full.set_block(inducing, 0, conditional_features(c, f_i.F, e));
  return {full, inducing};
}

// Block Gram [[G_ii, F_i F_t^T], [F_t F_i^T, F_t F_t^T]] with G_ii = F_i F_i^T.
template <Scalar T>
Matrix<T> assemble_block_gram(const Matrix<T>& f_i, const Matrix<T>& f_t) {
  const std::size_t a = f_i.rows();
  const std::size_t b = f_t.rows();
  Matrix<T> all(a + b, f_i.cols());
  all.set_block(0, 0, f_i);
  all.set_block(a, 0, f_t);
  return outer_gram(all);
}

// sum log N(Y; F, noise)
template <Scalar T>
T gp_output_loglik(const Matrix<T>& f, const DenseMatrix& y, const T& noise) {
  if (f.rows() != y.rows() || f.cols() != y.cols()) throw ShapeMismatch("gp_output_loglik: shapes differ");
  T sq(0.0);
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) {
      const T r = f(i, j) - y(i, j);
      sq += r * r;
    }
  const double n = static_cast<double>(y.size());
  return -0.5 * n * (kLogTwoPi + log(noise)) - 0.5 * sq / noise;
}

}  // namespace dwpkit::model
