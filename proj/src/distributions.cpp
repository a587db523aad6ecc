#include "dwpkit/distributions.hpp"

#include <cmath>

namespace dwpkit::dist {

GeneralizedBartlettParams<double> bartlett_prior_params(std::size_t P, std::size_t nu) {
  if (P == 0 || nu == 0) throw ShapeMismatch("bartlett_prior_params: P and nu must be >= 1");
  const std::size_t k = nu_tilde(P, nu);
  GeneralizedBartlettParams<double> b;
  b.P = P;
  b.nu = nu;
  b.alpha.resize(k);
  b.beta.assign(k, 0.5);
  for (std::size_t j = 0; j < k; ++j) b.alpha[j] = (static_cast<double>(nu) - static_cast<double>(j)) / 2.0;
  b.mu = DenseMatrix(P, k, 0.0);
  b.sigma = DenseMatrix(P, k, 1.0);
  return b;
}

BartlettFactor<double> sample_generalized_bartlett(const GeneralizedBartlettParams<double>& params,
                                                   RandomStream& rng) {
  params.validate();
  const std::size_t k = params.nu_tilde();
  DenseMatrix t(params.P, k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    t(j, j) = std::sqrt(rng.gamma(params.alpha[j], params.beta[j]));
    for (std::size_t i = j + 1; i < params.P; ++i)
      t(i, j) = rng.normal(params.mu(i, j), params.sigma(i, j));
  }
  return BartlettFactor<double>(std::move(t), params.nu);
}

GramSample assemble_gram(const ABGWParams<double>& params, const BartlettFactor<double>& t) {
  detail::check_factor_matches(t, params.bartlett);
  if (params.A.rows() != t.P() || params.A.cols() != t.P() || params.B.dim() != t.nu_tilde()) {
    throw ShapeMismatch("assemble_gram: A or B incompatible with the factor");
  }
  const DenseMatrix f = params.A * (t.matrix() * params.B.matrix());
  return GramSample{SymmetricPsd<double>(outer_gram(f), t.nu_tilde()), t};
}

BartlettFactor<double> recover_T(const SymmetricPsd<double>& G, const ABGWParams<double>& params) {
  const std::size_t p = G.dim();
  if (params.A.rows() != p || params.A.cols() != p) {
    throw ShapeMismatch("recover_T: A is " + shape_string(params.A.rows(), params.A.cols()) +
                        ", G is " + shape_string(p, p));
  }
  const std::size_t k = nu_tilde(p, params.nu);
  if (params.B.dim() != k) throw ShapeMismatch("recover_T: B must be " + shape_string(k, k));
  // C = A^-1 G A^-T
  const auto lu = linalg::lu_decompose(params.A);
  const DenseMatrix x = linalg::lu_solve(lu, G.matrix());
  const DenseMatrix c = linalg::lu_solve(lu, transpose(x));
  const DenseMatrix lambda = linalg::rank_cholesky(linalg::symmetrize(c), params.nu);
  // T B = Lambda  =>  B^T T^T = Lambda^T
  const DenseMatrix tt = linalg::tri_solve(params.B, transpose(lambda), true);
  DenseMatrix t = transpose(tt);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < k; ++j) t(i, j) = 0.0;
  return BartlettFactor<double>(std::move(t), params.nu);
}

ABGWParams<double> abgw_from_gw(const GWParams<double>& gw) {
  const std::size_t k = gw.bartlett.nu_tilde();
  return ABGWParams<double>{gw.scale_chol.matrix(), LowerTriangular<double>::identity(k), gw.nu,
                            gw.bartlett};
}

double wishart_mean_check(const SymmetricPsd<double>& scale, std::size_t nu,
                          std::size_t n_samples, RandomStream& rng) {
  if (n_samples < 2) throw DomainError("wishart_mean_check: need at least two samples");
  const std::size_t p = scale.dim();
  const auto l = linalg::cholesky(scale);
  const auto prior = bartlett_prior_params(p, nu);
  ABGWParams<double> ab{l.matrix(), LowerTriangular<double>::identity(prior.nu_tilde()), nu, prior};

  DenseMatrix sum(p, p, 0.0);
  DenseMatrix sum_sq(p, p, 0.0);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto g = assemble_gram(ab, sample_generalized_bartlett(prior, rng)).G;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        sum(i, j) += g(i, j);
        sum_sq(i, j) += g(i, j) * g(i, j);
      }
  }
  const double n = static_cast<double>(n_samples);
  double worst = 0.0;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double mean = sum(i, j) / n;
      const double var = (sum_sq(i, j) - n * mean * mean) / (n - 1.0);
      const double se = std::sqrt(std::max(var, 0.0) / n);
      const double target = static_cast<double>(nu) * scale(i, j);
      const double dev = std::abs(mean - target);
      const double z = se > 0.0 ? dev / se : (dev == 0.0 ? 0.0 : INFINITY);
      worst = std::max(worst, z);
    }
  return worst;
}

}  // namespace dwpkit::dist
