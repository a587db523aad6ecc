#pragma once

// Wishart, singular Wishart and the generalised (GW, A-GW, AB-GW) families,
// all parameterised through a lower-trapezoidal Bartlett factor T.
//
// Index conventions: a P x nu factor is stored as a P x nu~ matrix with
// nu~ = min(nu, P); entry (i, j) is free iff i >= j. Diagonal entries are
// Gamma-squared, strictly-lower entries Gaussian.

#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "dwpkit/errors.hpp"
#include "dwpkit/linalg.hpp"
#include "dwpkit/matrix.hpp"
#include "dwpkit/random.hpp"
#include "dwpkit/special.hpp"

namespace dwpkit::dist {

using linalg::LowerTriangular;
using linalg::SymmetricPsd;

inline std::size_t nu_tilde(std::size_t p, std::size_t nu) { return std::min(p, nu); }

template <Scalar T>
class BartlettFactor {
 public:
  BartlettFactor() = default;
  BartlettFactor(Matrix<T> t, std::size_t nu) : t_(std::move(t)), nu_(nu) {
    if (nu_ == 0 || t_.rows() == 0) throw ShapeMismatch("BartlettFactor: empty factor");
    if (t_.cols() != dist::nu_tilde(t_.rows(), nu_)) {
      throw ShapeMismatch("BartlettFactor: expected " +
                          shape_string(t_.rows(), dist::nu_tilde(t_.rows(), nu_)) + " for nu=" +
                          std::to_string(nu_) + ", got " + shape_string(t_.rows(), t_.cols()));
    }
    for (std::size_t i = 0; i < t_.rows(); ++i)
      for (std::size_t j = i + 1; j < t_.cols(); ++j)
        if (value(t_(i, j)) != 0.0) throw DomainError("BartlettFactor: entry above the diagonal");
    for (std::size_t j = 0; j < t_.cols(); ++j)
      if (!(value(t_(j, j)) > 0.0)) {
        throw SupportError("BartlettFactor: diagonal entry " + std::to_string(j) +
                           " is not positive");
      }
  }

  std::size_t P() const { return t_.rows(); }
  std::size_t nu() const { return nu_; }
  std::size_t nu_tilde() const { return t_.cols(); }
  const T& operator()(std::size_t i, std::size_t j) const { return t_(i, j); }
  const Matrix<T>& matrix() const { return t_; }

  // Number of free entries in the trapezoid.
  std::size_t stored_entries() const {
    const std::size_t k = nu_tilde();
    return k * P() - k * (k - 1) / 2;
  }

 private:
  Matrix<T> t_;
  std::size_t nu_ = 0;
};

// Gamma shapes/rates for the diagonal and Gaussian means/scales for the
// strictly-lower entries. mu and sigma are P x nu~; only i > j is read.
template <Scalar T>
struct GeneralizedBartlettParams {
  std::size_t P = 0;
  std::size_t nu = 0;
  std::vector<T> alpha;
  std::vector<T> beta;
  Matrix<T> mu;
  Matrix<T> sigma;

  std::size_t nu_tilde() const { return dist::nu_tilde(P, nu); }

  void validate() const {
    const std::size_t k = nu_tilde();
    if (P == 0 || nu == 0) throw ShapeMismatch("bartlett params: P and nu must be >= 1");
    if (alpha.size() != k || beta.size() != k || mu.rows() != P || mu.cols() != k ||
        sigma.rows() != P || sigma.cols() != k) {
      throw ShapeMismatch("bartlett params: index sets do not match a " + shape_string(P, k) +
                          " trapezoid");
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (!(value(alpha[j]) > 0.0) || !(value(beta[j]) > 0.0)) {
        throw DomainError("bartlett params: alpha/beta must be positive at " + std::to_string(j));
      }
      for (std::size_t i = j + 1; i < P; ++i)
        if (!(value(sigma(i, j)) > 0.0)) {
          throw DomainError("bartlett params: sigma must be positive at (" + std::to_string(i) +
                            "," + std::to_string(j) + ")");
        }
    }
  }
};

template <Scalar T>
struct GWParams {
  LowerTriangular<T> scale_chol;
  std::size_t nu = 0;
  GeneralizedBartlettParams<T> bartlett;
};

template <Scalar T>
struct ABGWParams {
  Matrix<T> A;
  LowerTriangular<T> B;
  std::size_t nu = 0;
  GeneralizedBartlettParams<T> bartlett;
};

struct GramSample {
  SymmetricPsd<double> G;
  BartlettFactor<double> T;
};

// Standard (singular) Bartlett parameters: alpha_j = (nu - j + 1)/2, beta = 1/2.
GeneralizedBartlettParams<double> bartlett_prior_params(std::size_t P, std::size_t nu);

BartlettFactor<double> sample_generalized_bartlett(const GeneralizedBartlettParams<double>& params,
                                                   RandomStream& rng);

GramSample assemble_gram(const ABGWParams<double>& params, const BartlettFactor<double>& t);

BartlettFactor<double> recover_T(const SymmetricPsd<double>& G, const ABGWParams<double>& params);

// ABGW parameters that express GW(L L^T) (A = L, B = I).
ABGWParams<double> abgw_from_gw(const GWParams<double>& gw);

// Max over entries of |mean - nu Sigma| / standard error for n_samples
// standard-construction Wishart draws.
double wishart_mean_check(const SymmetricPsd<double>& scale, std::size_t nu,
                          std::size_t n_samples, RandomStream& rng);

namespace detail {

template <Scalar T>
void check_factor_matches(const BartlettFactor<T>& t, const GeneralizedBartlettParams<T>& b) {
  if (t.P() != b.P || t.nu_tilde() != b.nu_tilde()) {
    throw ShapeMismatch("factor " + shape_string(t.P(), t.nu_tilde()) +
                        " does not match parameters " + shape_string(b.P, b.nu_tilde()));
  }
}

// Sum of log Gamma(T_jj^2) - (P - j) log T_jj over the diagonal plus the
// Gaussian terms of the strictly-lower entries (1-based j in the exponent).
template <Scalar T>
T bartlett_terms(const BartlettFactor<T>& t, const GeneralizedBartlettParams<T>& b) {
  const std::size_t p = t.P();
  const std::size_t k = t.nu_tilde();
  T s(0.0);
  for (std::size_t j = 0; j < k; ++j) {
    const T& tjj = t(j, j);
    s += log_gamma_density(tjj * tjj, b.alpha[j], b.beta[j]);
    s -= static_cast<double>(p - j - 1) * log(tjj);
    for (std::size_t i = j + 1; i < p; ++i) s += log_normal_density(t(i, j), b.mu(i, j), b.sigma(i, j));
  }
  return s;
}

}  // namespace detail

// log density of the factor itself, including the 2 T_jj change of variables
// from T_jj^2 to T_jj.
template <Scalar T>
T log_density_bartlett_factor(const BartlettFactor<T>& t, const GeneralizedBartlettParams<T>& b) {
  detail::check_factor_matches(t, b);
  const std::size_t k = t.nu_tilde();
  T s(0.0);
  for (std::size_t j = 0; j < k; ++j) {
    const T& tjj = t(j, j);
    s += std::numbers::ln2 + log(tjj) + log_gamma_density(tjj * tjj, b.alpha[j], b.beta[j]);
    for (std::size_t i = j + 1; i < t.P(); ++i)
      s += log_normal_density(t(i, j), b.mu(i, j), b.sigma(i, j));
  }
  return s;
}

// (Singular) Wishart log density given a factor F with G = F F^T, where the
// leading nu~ rows of F form a square block, and the Cholesky of the scale.
template <Scalar T>
T log_density_wishart_factored(const Matrix<T>& factor, const LowerTriangular<T>& scale_chol,
                               std::size_t nu) {
  const std::size_t p = factor.rows();
  const std::size_t k = nu_tilde(p, nu);
  if (scale_chol.dim() != p || factor.cols() != k) {
    throw ShapeMismatch("wishart: factor " + shape_string(factor.rows(), factor.cols()) +
                        " incompatible with scale of dimension " + std::to_string(scale_chol.dim()));
  }
  const double pd = static_cast<double>(p);
  const double nud = static_cast<double>(nu);
  const double kd = static_cast<double>(k);

  T lead_logdet;
  try {
    lead_logdet = 2.0 * linalg::log_abs_det(factor.block(0, 0, k, k));
  } catch (const Singular&) {
    throw SupportError("wishart: leading block of G is singular");
  }
  const Matrix<T> w = linalg::tri_solve(scale_chol, factor);
  T quad(0.0);
  quad = dot_accumulate(quad, w.data(), 1, w.data(), 1, w.size(), 1.0);

  return nud * (kd - pd) / 2.0 * std::log(std::numbers::pi) - nud * pd / 2.0 * std::numbers::ln2 -
         nud * linalg::log_det_triangular(scale_chol) -
         linalg::log_multivariate_gamma(k, nud / 2.0) + (nud - pd - 1.0) / 2.0 * lead_logdet -
         0.5 * quad;
}

// log of the (singular) Wishart density at G with scale Sigma and nu
// degrees of freedom. Determinants are Cholesky log-dets.
template <Scalar T>
T log_density_wishart(const SymmetricPsd<T>& G, const LowerTriangular<T>& scale_chol,
                      std::size_t nu) {
  const std::size_t p = G.dim();
  const std::size_t k = nu_tilde(p, nu);
  if (scale_chol.dim() != p) throw ShapeMismatch("wishart: G and scale differ in dimension");
  const double pd = static_cast<double>(p);
  const double nud = static_cast<double>(nu);
  const double kd = static_cast<double>(k);

  T lead_logdet;
  try {
    const SymmetricPsd<T> lead(G.matrix().block(0, 0, k, k));
    lead_logdet = 2.0 * linalg::log_det_triangular(linalg::cholesky(lead, linalg::JitterPolicy::none()));
  } catch (const FactorizationFailure&) {
    throw SupportError("wishart: leading " + std::to_string(k) + "x" + std::to_string(k) +
                       " block of G is not positive definite");
  }
  // tr(Sigma^-1 G) = tr(L^-T L^-1 G)
  const Matrix<T> w = linalg::tri_solve(scale_chol, G.matrix());
  const Matrix<T> v = linalg::tri_solve(scale_chol, w, true);

  return nud * (kd - pd) / 2.0 * std::log(std::numbers::pi) - nud * pd / 2.0 * std::numbers::ln2 -
         nud * linalg::log_det_triangular(scale_chol) -
         linalg::log_multivariate_gamma(k, nud / 2.0) + (nud - pd - 1.0) / 2.0 * lead_logdet -
         0.5 * trace(v);
}

template <Scalar T>
T log_density_wishart(const SymmetricPsd<T>& G, const SymmetricPsd<T>& scale, std::size_t nu) {
  return log_density_wishart(G, linalg::cholesky(scale), nu);
}

// GW density of W = L T T^T L^T, as a function of T.
template <Scalar T>
T log_density_gw(const BartlettFactor<T>& t, const GWParams<T>& params) {
  detail::check_factor_matches(t, params.bartlett);
  const std::size_t p = t.P();
  const std::size_t nu = params.nu;
  const std::size_t k = t.nu_tilde();
  const auto& l = params.scale_chol;
  if (l.dim() != p) throw ShapeMismatch("gw: scale Cholesky dimension differs from P");
  for (std::size_t j = 0; j < p; ++j)
    if (!(value(l(j, j)) > 0.0)) throw NonPositiveDiagonal("gw: scale Cholesky diagonal");

  T s(0.0);
  for (std::size_t j = 0; j < p; ++j)
    s -= static_cast<double>(std::min(j + 1, nu)) * log(l(j, j));
  for (std::size_t j = 0; j < k; ++j) s -= static_cast<double>(p - j) * log(l(j, j));
  return s + detail::bartlett_terms(t, params.bartlett);
}

// A-GW density of G = (A T)(A T)^T, as a function of T, evaluated through
// Cholesky log-determinants of the Gram matrices.
template <Scalar T>
T log_density_agw(const BartlettFactor<T>& t, const Matrix<T>& a, std::size_t nu,
                  const GeneralizedBartlettParams<T>& bartlett) {
  detail::check_factor_matches(t, bartlett);
  const std::size_t p = t.P();
  const std::size_t k = t.nu_tilde();
  if (a.rows() != p || a.cols() != p) throw ShapeMismatch("agw: A must be " + shape_string(p, p));
  const auto lead_logdet = [k](const Matrix<T>& g) {
    try {
      return 2.0 * linalg::log_det_triangular(linalg::cholesky(
                       linalg::symmetrize(g.block(0, 0, k, k)), linalg::JitterPolicy::none()));
    } catch (const FactorizationFailure&) {
      throw SupportError("agw: leading block is not positive definite");
    }
  };
  const T a_logdet = linalg::log_abs_det(a);
  const T g_lead = lead_logdet(outer_gram(Matrix<T>(a * t.matrix())));
  const T c_lead = lead_logdet(outer_gram(t.matrix()));
  const double nud = static_cast<double>(nu);
  return (nud - static_cast<double>(p) - 1.0) / 2.0 * (g_lead - c_lead) - nud * a_logdet +
         detail::bartlett_terms(t, bartlett);
}

// AB-GW density of G = (A T B)(A T B)^T, as a function of T. The A-GW
// density is the B = I case.
template <Scalar T>
T log_density_abgw(const BartlettFactor<T>& t, const ABGWParams<T>& params) {
  detail::check_factor_matches(t, params.bartlett);
  const std::size_t p = t.P();
  const std::size_t k = t.nu_tilde();
  const auto& b = params.B;
  if (params.A.rows() != p || params.A.cols() != p || b.dim() != k) {
    throw ShapeMismatch("abgw: A must be " + shape_string(p, p) + " and B " + shape_string(k, k));
  }
  for (std::size_t j = 0; j < k; ++j)
    if (!(value(b(j, j)) > 0.0)) throw NonPositiveDiagonal("abgw: B diagonal must be positive");

  const double nud = static_cast<double>(params.nu);
  const double pd = static_cast<double>(p);

  const Matrix<T> tb = t.matrix() * b.matrix();
  const Matrix<T> atb = params.A * tb;
  T g_lead;
  T a_logdet;
  try {
    a_logdet = linalg::log_abs_det(params.A);
    g_lead = 2.0 * linalg::log_abs_det(atb.block(0, 0, k, k));
  } catch (const Singular& e) {
    throw Singular(std::string("abgw: ") + e.what());
  }
  // (T B) restricted to its leading rows is lower triangular.
  T c_lead(0.0);
  for (std::size_t j = 0; j < k; ++j) c_lead += 2.0 * log(t(j, j) * b(j, j));

  T s = (nud - pd - 1.0) / 2.0 * (g_lead - c_lead) - nud * a_logdet;
  for (std::size_t j = 0; j < k; ++j) s -= 2.0 * static_cast<double>(p - j) * log(b(j, j));
  return s + detail::bartlett_terms(t, params.bartlett);
}

}  // namespace dwpkit::dist
