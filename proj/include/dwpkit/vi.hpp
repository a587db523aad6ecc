#pragma once

// Variational inference for the deep Wishart process.
//
// All learnable quantities live in one flat vector of unconstrained reals
// described by a ParamLayout. `constrain` maps that vector, over double or
// ad::Var, onto the typed per-layer parameters; the forward pass is written
// once over both scalar types so reverse-mode and finite-difference
// gradients see the same arithmetic.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dwpkit/distributions.hpp"
#include "dwpkit/linalg.hpp"
#include "dwpkit/matrix.hpp"
#include "dwpkit/model.hpp"
#include "dwpkit/random.hpp"
#include "dwpkit/special.hpp"

namespace dwpkit::vi {

using linalg::LowerTriangular;
using linalg::SymmetricPsd;
using model::DWPConfig;
using model::KernelConfig;

enum class Family { GW, AGW, ABGW };

std::string family_name(Family f);
Family parse_family(const std::string& s);

struct BlockSpec {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return rows * cols; }
};

class ParamLayout {
 public:
  const BlockSpec& add(const std::string& name, std::size_t rows, std::size_t cols);
  const BlockSpec& find(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t size() const { return size_; }
  const std::vector<BlockSpec>& blocks() const { return blocks_; }

 private:
  std::vector<BlockSpec> blocks_;
  std::size_t size_ = 0;
};

ParamLayout make_layout(const DWPConfig& cfg);

std::string layer_block(std::size_t layer, const char* field);
std::string kernel_block(std::size_t layer, const char* field);

// Unconstrained parameter vector plus its layout.
struct ModelParams {
  ParamLayout layout;
  std::vector<double> theta;

  DenseMatrix get(const std::string& name) const;
  void set(const std::string& name, const DenseMatrix& m);
};

struct RegressionData {
  DenseMatrix x;  // N x input_dim, normalised
  DenseMatrix y;  // N x output_dim, normalised
};

template <Scalar T>
Matrix<T> read_block(const BlockSpec& b, std::span<const T> theta) {
  Matrix<T> m(b.rows, b.cols);
  for (std::size_t i = 0; i < b.size(); ++i) m.data()[i] = theta[b.offset + i];
  return m;
}

// Lower triangle of `raw` with softplus applied to the diagonal.
template <Scalar T>
LowerTriangular<T> positive_lower(const Matrix<T>& raw) {
  const std::size_t n = raw.rows();
  Matrix<T> l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) l(i, j) = raw(i, j);
    l(i, i) = softplus(raw(i, i));
  }
  return LowerTriangular<T>(std::move(l));
}

template <Scalar T>
struct LayerVariationalParams {
  Matrix<T> a_prime;
  LowerTriangular<T> b;
  Matrix<T> v;
  T q;
  dist::GeneralizedBartlettParams<T> bartlett;
};

template <Scalar T>
struct FinalLayerVariationalParams {
  Matrix<T> mean;             // P_i x outputs, whitened coordinates
  LowerTriangular<T> s_chol;  // shared across output columns, whitened
};

template <Scalar T>
struct ConstrainedParams {
  Matrix<T> inducing;
  std::vector<KernelConfig<T>> kernels;  // depth + 1; first is ARD
  std::vector<LayerVariationalParams<T>> layers;
  FinalLayerVariationalParams<T> final_layer;
  T noise;
};

template <Scalar T>
ConstrainedParams<T> constrain(const ParamLayout& layout, std::span<const T> theta,
                               const DWPConfig& cfg, Family family) {
  const auto blk = [&](const std::string& n) { return read_block(layout.find(n), theta); };
  const std::size_t p = cfg.inducing_count;
  ConstrainedParams<T> c;
  c.inducing = blk("inducing_inputs");
  for (std::size_t l = 0; l <= cfg.depth; ++l) {
    KernelConfig<T> k;
    k.variance = softplus(blk(kernel_block(l, "variance"))(0, 0));
    const Matrix<T> ls = blk(kernel_block(l, "lengthscale"));
    k.lengthscales.clear();
    for (std::size_t d = 0; d < ls.cols(); ++d) k.lengthscales.push_back(softplus(ls(0, d)));
    c.kernels.push_back(std::move(k));
  }
  for (std::size_t l = 1; l <= cfg.depth; ++l) {
    const std::size_t nu = cfg.widths[l - 1];
    const std::size_t k = std::min(nu, p);
    LayerVariationalParams<T> lp;
    lp.a_prime = family == Family::GW ? Matrix<T>::identity(p) : blk(layer_block(l, "a_prime"));
    lp.b = family == Family::ABGW ? positive_lower(blk(layer_block(l, "b")))
                                  : LowerTriangular<T>::identity(k);
    lp.v = blk(layer_block(l, "v"));
    lp.q = sigmoid(blk(layer_block(l, "q"))(0, 0));
    auto& b = lp.bartlett;
    b.P = p;
    b.nu = nu;
    const Matrix<T> alpha = blk(layer_block(l, "alpha"));
    const Matrix<T> beta = blk(layer_block(l, "beta"));
    for (std::size_t j = 0; j < k; ++j) {
      b.alpha.push_back(softplus(alpha(0, j)));
      b.beta.push_back(softplus(beta(0, j)));
    }
    b.mu = blk(layer_block(l, "mu"));
    const Matrix<T> sigma = blk(layer_block(l, "sigma"));
    b.sigma = Matrix<T>(p, k, T(1.0));
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t i = j + 1; i < p; ++i) b.sigma(i, j) = softplus(sigma(i, j));
    c.layers.push_back(std::move(lp));
  }
  c.final_layer.mean = blk("final.mean");
  c.final_layer.s_chol = positive_lower(blk("final.s_chol"));
  c.noise = softplus(blk("noise")(0, 0));
  return c;
}

// Standard-normal and uniform draws consumed by one forward pass.
struct LayerNoise {
  std::vector<double> u_diag;  // nu~ uniforms for the Gamma quantiles
  DenseMatrix z_lower;         // P_i x nu~, strict lower used
  DenseMatrix e;               // rows x nu, conditional feature noise
};

struct SampleNoise {
  std::vector<LayerNoise> layers;
  DenseMatrix z_final;  // P_i x outputs

  static SampleNoise draw(const DWPConfig& cfg, std::size_t rows, RandomStream& rng);
  // z = 0, E = 0 and u = 1/2: the median Bartlett diagonal.
  static SampleNoise zeros(const DWPConfig& cfg, std::size_t rows);
};

// A = chol((1 - q) K_prev_ii / nu + q V V^T) A'.
template <Scalar T>
Matrix<T> build_A(const Matrix<T>& k_prev_ii, const LayerVariationalParams<T>& layer,
                  std::size_t nu) {
  const std::size_t p = k_prev_ii.rows();
  const Matrix<T> vvt = outer_gram(layer.v);
  const T one_minus_q = 1.0 - layer.q;
  const double inv_nu = 1.0 / static_cast<double>(nu);
  Matrix<T> m(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j)
      m(i, j) = one_minus_q * (inv_nu * k_prev_ii(i, j)) + layer.q * vvt(i, j);
  return linalg::cholesky(linalg::symmetrize(m)).matrix() * layer.a_prime;
}

template <Scalar T>
dist::BartlettFactor<T> reparameterised_factor(const dist::GeneralizedBartlettParams<T>& b,
                                               const LayerNoise& noise) {
  const std::size_t k = b.nu_tilde();
  Matrix<T> t(b.P, k);
  for (std::size_t j = 0; j < k; ++j) {
    const double u = std::clamp(noise.u_diag[j], 1e-10, 1.0 - 1e-10);
    t(j, j) = sqrt(gamma_quantile(u, b.alpha[j], b.beta[j]));
    for (std::size_t i = j + 1; i < b.P; ++i) t(i, j) = b.mu(i, j) + b.sigma(i, j) * noise.z_lower(i, j);
  }
  return dist::BartlettFactor<T>(std::move(t), b.nu);
}

template <Scalar T>
struct ForwardResult {
  std::vector<T> layer_terms;  // log P - log Q per hidden layer
  T final_term;                // log P - log Q of the inducing outputs
  Matrix<T> mean;              // rows x outputs, E[f_t | f_i]
  std::vector<T> variance;     // rows, Var[f_t | f_i] (shared by outputs)
};

template <Scalar T>
ForwardResult<T> forward(const ConstrainedParams<T>& p, const DWPConfig& cfg,
                         const DenseMatrix& x_rows, const SampleNoise& noise) {
  const std::size_t pi = cfg.inducing_count;
  const std::size_t n = x_rows.rows();
  if (x_rows.cols() != cfg.input_dim) throw ShapeMismatch("forward: input width differs from config");
  if (n == 0) throw ShapeMismatch("forward: no data rows");

  Matrix<T> x_all(pi + n, cfg.input_dim);
  x_all.set_block(0, 0, p.inducing);
  x_all.set_block(pi, 0, lift<T>(x_rows));
  Matrix<T> k_full = model::kernel_matrix_ard(x_all, p.kernels[0]);

  ForwardResult<T> out;
  for (std::size_t l = 1; l <= cfg.depth; ++l) {
    try {
      const auto& lp = p.layers[l - 1];
      const auto& ln = noise.layers[l - 1];
      const std::size_t nu = cfg.widths[l - 1];
      const double inv_nu = 1.0 / static_cast<double>(nu);
      Matrix<T> s(k_full.rows(), k_full.cols());
      for (std::size_t i = 0; i < s.size(); ++i) s.data()[i] = inv_nu * k_full.data()[i];
      const auto cond = model::feature_conditional(s, pi);

      const Matrix<T> a = build_A(k_full.block(0, 0, pi, pi), lp, nu);
      const auto t = reparameterised_factor(lp.bartlett, ln);
      const Matrix<T> f_i = a * (t.matrix() * lp.b.matrix());
      const T log_p = dist::log_density_wishart_factored(f_i, cond.chol_ii, nu);
      const T log_q = dist::log_density_abgw(t, dist::ABGWParams<T>{a, lp.b, nu, lp.bartlett});
      out.layer_terms.push_back(log_p - log_q);

      Matrix<T> f_pad(pi, nu);
      f_pad.set_block(0, 0, f_i);
      const Matrix<T> f_t = model::conditional_features(cond, f_pad, lift<T>(ln.e));
      k_full = model::kernel_matrix_from_gram(model::assemble_block_gram(f_pad, f_t), p.kernels[l]);
    } catch (const FactorizationFailure& e) {
      throw FactorizationFailure("layer " + std::to_string(l) + ": " + e.what());
    }
  }

  // Output layer, whitened: f_i = chol(K_ii) v with v ~ N(m, S S^T), so the
  // prior on v is N(0, I) whatever Gram the hidden layers produced.
  const std::size_t outs = cfg.output_dim;
  LowerTriangular<T> lk;
  try {
    lk = linalg::cholesky(SymmetricPsd<T>(k_full.block(0, 0, pi, pi)));
  } catch (const FactorizationFailure& e) {
    throw FactorizationFailure("output layer: " + std::string(e.what()));
  }
  const auto& fl = p.final_layer;
  const Matrix<T> white = fl.mean + fl.s_chol.matrix() * lift<T>(noise.z_final);
  T quad_p = dot_accumulate(T(0.0), white.data(), 1, white.data(), 1, white.size(), 1.0);
  double quad_q = 0.0;
  for (double z : noise.z_final.storage()) quad_q += z * z;
  out.final_term = static_cast<double>(outs) * linalg::log_det_triangular(fl.s_chol) - 0.5 * quad_p +
                   0.5 * quad_q;

  const Matrix<T> w = linalg::tri_solve(lk, k_full.block(0, pi, pi, n));
  out.mean = transpose(w) * white;
  out.variance.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    T v = dot_accumulate(k_full(pi + r, pi + r), w.data() + r, n, w.data() + r, n, pi, -1.0);
    if (value(v) < 0.0) v = T(0.0);
    out.variance[r] = v;
  }
  return out;
}

template <Scalar T>
struct ElboTerms {
  std::vector<T> layer_terms;
  T final_term;
  T expected_loglik;

  T kl_part() const {
    T s = final_term;
    for (const T& t : layer_terms) s += t;
    return s;
  }
};

// E_{f_t | f_i}[log N(y; f_t, noise)] summed over rows and outputs.
template <Scalar T>
T expected_loglik(const ForwardResult<T>& f, const DenseMatrix& y, const T& noise) {
  if (f.mean.rows() != y.rows() || f.mean.cols() != y.cols()) {
    throw ShapeMismatch("expected_loglik: targets are " + shape_string(y.rows(), y.cols()));
  }
  T sq(0.0);
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t c = 0; c < y.cols(); ++c) {
      const T d = f.mean(r, c) - y(r, c);
      sq += d * d + f.variance[r];
    }
  const double count = static_cast<double>(y.size());
  return -0.5 * count * (kLogTwoPi + log(noise)) - 0.5 * sq / noise;
}

template <Scalar T>
ElboTerms<T> elbo_terms(const ParamLayout& layout, std::span<const T> theta, const DWPConfig& cfg,
                        Family family, const RegressionData& data, const SampleNoise& noise) {
  const auto p = constrain(layout, theta, cfg, family);
  auto f = forward(p, cfg, data.x, noise);
  ElboTerms<T> e;
  e.expected_loglik = expected_loglik(f, data.y, p.noise);
  e.layer_terms = std::move(f.layer_terms);
  e.final_term = f.final_term;
  return e;
}

struct ELBOReport {
  double total = 0.0;
  std::vector<double> layer_terms;
  double final_term = 0.0;
  double expected_loglik = 0.0;
  std::size_t n_samples = 0;

  double sum_of_parts() const;
};

ELBOReport make_report(const ElboTerms<double>& t);
ELBOReport average_reports(const std::vector<ELBOReport>& rs);

ModelParams init_params(const DWPConfig& cfg, const DenseMatrix& x_train, RandomStream& rng);

// Sets every hidden layer to its conditional prior: q = 0 exactly, A' = I,
// B = I and the Bartlett parameters at their prior values.
void match_conditional_prior(ModelParams& params, const DWPConfig& cfg);

ELBOReport elbo_single_sample(const ModelParams& params, const RegressionData& data,
                              const DWPConfig& cfg, Family family, RandomStream& rng);
ELBOReport elbo_estimate(const ModelParams& params, const RegressionData& data,
                         const DWPConfig& cfg, Family family, std::size_t n_samples,
                         RandomStream& rng);

enum class GradientMethod { ReverseMode, FiniteDifference };

struct GradientResult {
  std::vector<double> gradient;  // of the per-datapoint objective
  ELBOReport report;             // unweighted terms at the same draws
};

// Gradient of (E[log lik] + kl_weight * sum of log P - log Q) / N with
// common random numbers across every evaluation.
GradientResult gradient(const ModelParams& params, const RegressionData& data,
                        const DWPConfig& cfg, Family family, std::size_t n_samples,
                        RandomStream& rng, double kl_weight = 1.0,
                        GradientMethod method = GradientMethod::ReverseMode);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;
};

// One ascent step, beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
void adam_step(AdamState& state, std::vector<double>& params, const std::vector<double>& grad,
               double lr);

struct TrainConfig {
  std::size_t steps = 20000;
  double lr_initial = 1e-2;
  double lr_final = 1e-3;
  std::optional<std::size_t> lr_drop_step;   // default steps / 2
  std::optional<std::size_t> anneal_steps;   // default steps / 20
  std::size_t n_samples = 10;
  GradientMethod method = GradientMethod::ReverseMode;

  std::size_t drop_step() const { return lr_drop_step.value_or(steps / 2); }
  std::size_t warmup() const { return anneal_steps.value_or(steps / 20); }
  double learning_rate(std::size_t step) const { return step < drop_step() ? lr_initial : lr_final; }
  double anneal_factor(std::size_t step) const;
};

struct TrainStep {
  std::size_t step = 0;
  double anneal = 0.0;
  double learning_rate = 0.0;
  ELBOReport report;
};

struct TrainResult {
  ModelParams params;
  std::vector<TrainStep> trajectory;
};

TrainResult train(const RegressionData& data, const DWPConfig& cfg, Family family,
                  const TrainConfig& schedule, RandomStream& rng,
                  const ModelParams* initial = nullptr);

struct OutputScaling {
  std::vector<double> mean;
  std::vector<double> stddev;
  static OutputScaling identity(std::size_t outputs);
};

struct Prediction {
  DenseMatrix mean;       // original units
  DenseMatrix variance;   // original units, includes observation noise
  DenseMatrix log_lik;    // per point and output, original units (empty without targets)
  std::optional<double> mean_log_lik;
  std::optional<double> rmse;
};

struct PredictOptions {
  std::size_t n_samples = 100;
  bool zero_noise = false;
};

// Mixture over forward passes of N(mean_s, var_s + noise). Inputs and
// optional targets are in normalised units.
Prediction predict(const ModelParams& params, const DWPConfig& cfg, Family family,
                   const DenseMatrix& x_test, const std::optional<DenseMatrix>& y_test,
                   const OutputScaling& scaling, const PredictOptions& options, RandomStream& rng);

double log_mean_exp(std::span<const double> xs);

}  // namespace dwpkit::vi
