#pragma once

// Model setups with closed-form answers, shared by unit and acceptance tests.

#include <cmath>
#include <limits>

#include "dwpkit/linalg.hpp"
#include "dwpkit/vi.hpp"

namespace oracles {

using namespace dwpkit;

struct GpCase {
  model::DWPConfig cfg;
  vi::ModelParams params;
  vi::RegressionData data;
  double log_marginal = 0.0;
};

// No hidden layers, inducing points at the training inputs and the final
// layer set to the exact GP posterior, so every ELBO sample equals the log
// marginal likelihood.
inline GpCase gp_exact_posterior(std::size_t n, std::uint64_t seed) {
  RandomStream rng(seed);
  GpCase c;
  c.cfg.depth = 0;
  c.cfg.inducing_count = n;
  c.cfg.input_dim = 1;
  c.cfg.noise_variance = 0.2;
  c.cfg.kernel_variance = 1.3;
  c.cfg.kernel_lengthscale = 0.7;
  c.data.x = DenseMatrix(n, 1);
  c.data.y = DenseMatrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = -3.0 + 6.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    c.data.x(i, 0) = x;
    c.data.y(i, 0) = std::sin(1.5 * x) + 0.3 * rng.normal();
  }
  c.params = vi::init_params(c.cfg, c.data.x, rng);
  c.params.set("inducing_inputs", c.data.x);

  const double noise = c.cfg.noise_variance;
  const model::KernelConfig<double> kc{c.cfg.kernel_variance, {c.cfg.kernel_lengthscale}};
  const DenseMatrix k = model::kernel_matrix_ard(c.data.x, kc);
  DenseMatrix ky = k;
  for (std::size_t i = 0; i < n; ++i) ky(i, i) += noise;
  const auto lky = linalg::cholesky(linalg::SymmetricPsd<double>(ky));
  const DenseMatrix alpha = linalg::tri_solve(lky, c.data.y);
  double quad = 0.0;
  for (double a : alpha.storage()) quad += a * a;
  c.log_marginal = -0.5 * quad - linalg::log_det_triangular(lky) -
                   0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);

  // posterior mean K Ky^-1 y and covariance K - K Ky^-1 K, whitened by chol(K)
  const DenseMatrix kinv_k = linalg::tri_solve(lky, k);
  const DenseMatrix mean = transpose(kinv_k) * alpha;
  const DenseMatrix cov = k - transpose(kinv_k) * kinv_k;
  const auto lk = linalg::cholesky(linalg::SymmetricPsd<double>(k));
  DenseMatrix s = linalg::tri_solve(lk, linalg::cholesky(linalg::symmetrize(cov)).matrix());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) s(i, j) = 0.0;
  for (std::size_t i = 0; i < n; ++i) s(i, i) = softplus_inverse(s(i, i));
  c.params.set("final.mean", linalg::tri_solve(lk, mean));
  c.params.set("final.s_chol", s);
  return c;
}

// Smooth 1-D regression data, inputs roughly standardised.
inline vi::RegressionData toy_regression(std::size_t n, RandomStream& rng, double noise_sd = 0.1) {
  vi::RegressionData d{DenseMatrix(n, 1), DenseMatrix(n, 1)};
  for (std::size_t i = 0; i < n; ++i) {
    const double x = -2.0 + 4.0 * rng.uniform();
    d.x(i, 0) = x;
    d.y(i, 0) = std::sin(2.0 * x) + 0.3 * x + noise_sd * rng.normal();
  }
  return d;
}

}  // namespace oracles
