#include "dwpkit/vi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dwpkit/autodiff.hpp"

namespace dwpkit::vi {

std::string family_name(Family f) {
  switch (f) {
    case Family::GW:
      return "gw";
    case Family::AGW:
      return "agw";
    case Family::ABGW:
      return "abgw";
  }
  return "?";
}

Family parse_family(const std::string& s) {
  std::string t;
  for (char c : s)
    if (c != '-' && c != '_') t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (t == "gw") return Family::GW;
  if (t == "agw") return Family::AGW;
  if (t == "abgw") return Family::ABGW;
  throw ConfigError("unknown family '" + s + "' (expected gw, agw or abgw)");
}

const BlockSpec& ParamLayout::add(const std::string& name, std::size_t rows, std::size_t cols) {
  if (contains(name)) throw ConfigError("duplicate parameter block " + name);
  blocks_.push_back({name, rows, cols, size_});
  size_ += rows * cols;
  return blocks_.back();
}

const BlockSpec& ParamLayout::find(const std::string& name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return b;
  throw ConfigError("no parameter block named " + name);
}

bool ParamLayout::contains(const std::string& name) const {
  return std::any_of(blocks_.begin(), blocks_.end(), [&](const BlockSpec& b) { return b.name == name; });
}

std::string layer_block(std::size_t layer, const char* field) {
  return "layer" + std::to_string(layer) + "." + field;
}

std::string kernel_block(std::size_t layer, const char* field) {
  return "kernel" + std::to_string(layer) + "." + field;
}

ParamLayout make_layout(const DWPConfig& cfg) {
  cfg.validate();
  const std::size_t p = cfg.inducing_count;
  ParamLayout layout;
  layout.add("inducing_inputs", p, cfg.input_dim);
  for (std::size_t l = 0; l <= cfg.depth; ++l) {
    layout.add(kernel_block(l, "variance"), 1, 1);
    layout.add(kernel_block(l, "lengthscale"), 1, l == 0 ? cfg.input_dim : 1);
  }
  for (std::size_t l = 1; l <= cfg.depth; ++l) {
    const std::size_t k = std::min(cfg.widths[l - 1], p);
    layout.add(layer_block(l, "a_prime"), p, p);
    layout.add(layer_block(l, "b"), k, k);
    layout.add(layer_block(l, "v"), p, p);
    layout.add(layer_block(l, "q"), 1, 1);
    layout.add(layer_block(l, "alpha"), 1, k);
    layout.add(layer_block(l, "beta"), 1, k);
    layout.add(layer_block(l, "mu"), p, k);
    layout.add(layer_block(l, "sigma"), p, k);
  }
  layout.add("final.mean", p, cfg.output_dim);
  layout.add("final.s_chol", p, p);
  layout.add("noise", 1, 1);
  return layout;
}

DenseMatrix ModelParams::get(const std::string& name) const {
  return read_block(layout.find(name), std::span<const double>(theta));
}

void ModelParams::set(const std::string& name, const DenseMatrix& m) {
  const auto& b = layout.find(name);
  if (m.rows() != b.rows || m.cols() != b.cols) {
    throw ShapeMismatch("parameter " + name + " is " + shape_string(b.rows, b.cols) + ", got " +
                        shape_string(m.rows(), m.cols()));
  }
  std::copy(m.storage().begin(), m.storage().end(), theta.begin() + static_cast<std::ptrdiff_t>(b.offset));
}

SampleNoise SampleNoise::draw(const DWPConfig& cfg, std::size_t rows, RandomStream& rng) {
  const std::size_t p = cfg.inducing_count;
  SampleNoise s;
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    const std::size_t nu = cfg.widths[l];
    const std::size_t k = std::min(nu, p);
    LayerNoise n;
    n.u_diag.resize(k);
    for (auto& u : n.u_diag) u = rng.uniform();
    n.z_lower = DenseMatrix(p, k, 0.0);
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t i = j + 1; i < p; ++i) n.z_lower(i, j) = rng.normal();
    n.e = DenseMatrix(rows, nu);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < nu; ++j) n.e(i, j) = rng.normal();
    s.layers.push_back(std::move(n));
  }
  s.z_final = DenseMatrix(p, cfg.output_dim);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < cfg.output_dim; ++j) s.z_final(i, j) = rng.normal();
  return s;
}

SampleNoise SampleNoise::zeros(const DWPConfig& cfg, std::size_t rows) {
  const std::size_t p = cfg.inducing_count;
  SampleNoise s;
  for (std::size_t l = 0; l < cfg.depth; ++l) {
    const std::size_t k = std::min(cfg.widths[l], p);
    s.layers.push_back({std::vector<double>(k, 0.5), DenseMatrix(p, k, 0.0),
                        DenseMatrix(rows, cfg.widths[l], 0.0)});
  }
  s.z_final = DenseMatrix(p, cfg.output_dim, 0.0);
  return s;
}

double ELBOReport::sum_of_parts() const {
  double s = expected_loglik + final_term;
  for (double t : layer_terms) s += t;
  return s;
}

ELBOReport make_report(const ElboTerms<double>& t) {
  ELBOReport r;
  r.layer_terms = t.layer_terms;
  r.final_term = t.final_term;
  r.expected_loglik = t.expected_loglik;
  r.n_samples = 1;
  r.total = r.sum_of_parts();
  return r;
}

ELBOReport average_reports(const std::vector<ELBOReport>& rs) {
  if (rs.empty()) throw DomainError("average_reports: no reports");
  ELBOReport a;
  a.layer_terms.assign(rs.front().layer_terms.size(), 0.0);
  const double n = static_cast<double>(rs.size());
  for (const auto& r : rs) {
    for (std::size_t l = 0; l < r.layer_terms.size(); ++l) a.layer_terms[l] += r.layer_terms[l] / n;
    a.final_term += r.final_term / n;
    a.expected_loglik += r.expected_loglik / n;
    a.n_samples += r.n_samples;
  }
  a.total = a.sum_of_parts();
  return a;
}

void match_conditional_prior(ModelParams& params, const DWPConfig& cfg) {
  const std::size_t p = cfg.inducing_count;
  for (std::size_t l = 1; l <= cfg.depth; ++l) {
    const std::size_t nu = cfg.widths[l - 1];
    const std::size_t k = std::min(nu, p);
    const auto prior = dist::bartlett_prior_params(p, nu);
    params.set(layer_block(l, "a_prime"), DenseMatrix::identity(p));
    DenseMatrix b(k, k, 0.0);
    for (std::size_t i = 0; i < k; ++i) b(i, i) = softplus_inverse(1.0);
    params.set(layer_block(l, "b"), b);
    params.set(layer_block(l, "q"), DenseMatrix(1, 1, -std::numeric_limits<double>::infinity()));
    DenseMatrix alpha(1, k);
    DenseMatrix beta(1, k);
    for (std::size_t j = 0; j < k; ++j) {
      alpha(0, j) = softplus_inverse(prior.alpha[j]);
      beta(0, j) = softplus_inverse(prior.beta[j]);
    }
    params.set(layer_block(l, "alpha"), alpha);
    params.set(layer_block(l, "beta"), beta);
    params.set(layer_block(l, "mu"), DenseMatrix(p, k, 0.0));
    params.set(layer_block(l, "sigma"), DenseMatrix(p, k, softplus_inverse(1.0)));
  }
}

ModelParams init_params(const DWPConfig& cfg, const DenseMatrix& x_train, RandomStream& rng) {
  const std::size_t p = cfg.inducing_count;
  if (x_train.cols() != cfg.input_dim) throw ShapeMismatch("init_params: input width differs from config");
  if (x_train.rows() < p) {
    throw ConfigError("init_params: inducing_count " + std::to_string(p) + " exceeds the " +
                      std::to_string(x_train.rows()) + " training rows");
  }
  ModelParams mp{make_layout(cfg), {}};
  mp.theta.assign(mp.layout.size(), 0.0);

  // inducing inputs: a random subset of training rows
  std::vector<std::size_t> idx(x_train.rows());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < p; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_u64() % (idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  DenseMatrix xi(p, cfg.input_dim);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t d = 0; d < cfg.input_dim; ++d) xi(i, d) = x_train(idx[i], d);
  mp.set("inducing_inputs", xi);

  const double var_raw = softplus_inverse(cfg.kernel_variance);
  const double len_raw = softplus_inverse(cfg.kernel_lengthscale);
  for (std::size_t l = 0; l <= cfg.depth; ++l) {
    mp.set(kernel_block(l, "variance"), DenseMatrix(1, 1, var_raw));
    mp.set(kernel_block(l, "lengthscale"), DenseMatrix(1, l == 0 ? cfg.input_dim : 1, len_raw));
  }

  KernelConfig<double> k0{cfg.kernel_variance,
                          std::vector<double>(cfg.input_dim, cfg.kernel_lengthscale)};
  const DenseMatrix kii = model::kernel_matrix_ard(xi, k0);
  match_conditional_prior(mp, cfg);
  for (std::size_t l = 1; l <= cfg.depth; ++l) {
    const DenseMatrix s = (1.0 / static_cast<double>(cfg.widths[l - 1])) * kii;
    mp.set(layer_block(l, "v"), linalg::cholesky(SymmetricPsd<double>(s)).matrix());
    mp.set(layer_block(l, "q"), DenseMatrix(1, 1, -2.0));
  }
  DenseMatrix s_raw(p, p, 0.0);
  for (std::size_t i = 0; i < p; ++i) s_raw(i, i) = softplus_inverse(1.0);
  mp.set("final.mean", DenseMatrix(p, cfg.output_dim, 0.0));
  mp.set("final.s_chol", s_raw);
  mp.set("noise", DenseMatrix(1, 1, softplus_inverse(cfg.noise_variance)));
  return mp;
}

namespace {

void check_params(const ModelParams& params) {
  if (params.theta.size() != params.layout.size()) {
    throw ShapeMismatch("parameter vector has " + std::to_string(params.theta.size()) +
                        " entries, layout expects " + std::to_string(params.layout.size()));
  }
}

ElboTerms<double> evaluate(const ModelParams& params, std::span<const double> theta,
                           const RegressionData& data, const DWPConfig& cfg, Family family,
                           const SampleNoise& noise) {
  return elbo_terms<double>(params.layout, theta, cfg, family, data, noise);
}

}  // namespace

ELBOReport elbo_single_sample(const ModelParams& params, const RegressionData& data,
                              const DWPConfig& cfg, Family family, RandomStream& rng) {
  check_params(params);
  const auto noise = SampleNoise::draw(cfg, data.x.rows(), rng);
  return make_report(evaluate(params, params.theta, data, cfg, family, noise));
}

ELBOReport elbo_estimate(const ModelParams& params, const RegressionData& data,
                         const DWPConfig& cfg, Family family, std::size_t n_samples,
                         RandomStream& rng) {
  if (n_samples == 0) throw DomainError("elbo_estimate: n_samples must be >= 1");
  std::vector<ELBOReport> rs;
  for (std::size_t s = 0; s < n_samples; ++s)
    rs.push_back(elbo_single_sample(params, data, cfg, family, rng));
  return average_reports(rs);
}

GradientResult gradient(const ModelParams& params, const RegressionData& data,
                        const DWPConfig& cfg, Family family, std::size_t n_samples,
                        RandomStream& rng, double kl_weight, GradientMethod method) {
  check_params(params);
  if (n_samples == 0) throw DomainError("gradient: n_samples must be >= 1");
  std::vector<SampleNoise> noises;
  for (std::size_t s = 0; s < n_samples; ++s) noises.push_back(SampleNoise::draw(cfg, data.x.rows(), rng));
  const double scale = 1.0 / (static_cast<double>(data.x.rows()) * static_cast<double>(n_samples));
  const std::size_t n = params.theta.size();

  GradientResult out;
  out.gradient.assign(n, 0.0);
  std::vector<ELBOReport> reports;

  if (method == GradientMethod::ReverseMode) {
    for (const auto& noise : noises) {
      ad::Tape tape;
      std::vector<Var> theta;
      theta.reserve(n);
      for (double x : params.theta) theta.push_back(tape.variable(x));
      const auto terms = elbo_terms<Var>(params.layout, theta, cfg, family, data, noise);
      const Var objective = (terms.expected_loglik + kl_weight * terms.kl_part()) * scale;
      const auto adj = tape.gradient(objective);
      for (std::size_t k = 0; k < n; ++k) out.gradient[k] += adj[static_cast<std::size_t>(theta[k].id())];
      ElboTerms<double> v;
      for (const Var& t : terms.layer_terms) v.layer_terms.push_back(t.value());
      v.final_term = terms.final_term.value();
      v.expected_loglik = terms.expected_loglik.value();
      reports.push_back(make_report(v));
    }
  } else {
    const auto objective = [&](std::span<const double> theta) {
      double total = 0.0;
      for (const auto& noise : noises) {
        const auto t = evaluate(params, theta, data, cfg, family, noise);
        total += (t.expected_loglik + kl_weight * t.kl_part()) * scale;
      }
      return total;
    };
    for (const auto& noise : noises)
      reports.push_back(make_report(evaluate(params, params.theta, data, cfg, family, noise)));
    std::vector<double> theta = params.theta;
    for (std::size_t k = 0; k < n; ++k) {
      const double x0 = theta[k];
      const double h = 1e-4 * (1.0 + std::abs(x0));
      theta[k] = x0 + h;
      const double up = objective(theta);
      theta[k] = x0 - h;
      const double down = objective(theta);
      theta[k] = x0;
      out.gradient[k] = (up - down) / (2.0 * h);
    }
  }
  for (std::size_t k = 0; k < n; ++k)
    if (!std::isfinite(out.gradient[k])) {
      throw NonFiniteGradient("gradient: component " + std::to_string(k) + " is not finite");
    }
  out.report = average_reports(reports);
  return out;
}

void adam_step(AdamState& state, std::vector<double>& params, const std::vector<double>& grad,
               double lr) {
  constexpr double b1 = 0.9;
  constexpr double b2 = 0.999;
  constexpr double eps = 1e-8;
  if (grad.size() != params.size()) throw ShapeMismatch("adam_step: gradient size differs");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    state.m[k] = b1 * state.m[k] + (1.0 - b1) * grad[k];
    state.v[k] = b2 * state.v[k] + (1.0 - b2) * grad[k] * grad[k];
    const double mhat = state.m[k] / c1;
    const double vhat = state.v[k] / c2;
    params[k] += lr * mhat / (std::sqrt(vhat) + eps);
  }
}

double TrainConfig::anneal_factor(std::size_t step) const {
  const std::size_t w = warmup();
  if (w == 0 || step >= w) return 1.0;
  return static_cast<double>(step) / static_cast<double>(w);
}

TrainResult train(const RegressionData& data, const DWPConfig& cfg, Family family,
                  const TrainConfig& schedule, RandomStream& rng, const ModelParams* initial) {
  TrainResult res{initial ? *initial : init_params(cfg, data.x, rng), {}};
  check_params(res.params);
  AdamState adam;
  for (std::size_t step = 0; step < schedule.steps; ++step) {
    const double w = schedule.anneal_factor(step);
    const double lr = schedule.learning_rate(step);
    GradientResult g;
    try {
      g = gradient(res.params, data, cfg, family, schedule.n_samples, rng, w, schedule.method);
    } catch (const Error& e) {
      throw NonFiniteGradient("training aborted at step " + std::to_string(step) + ": " + e.what());
    }
    if (!std::isfinite(g.report.total)) {
      throw NonFiniteGradient("training aborted at step " + std::to_string(step) +
                              ": ELBO is not finite");
    }
    res.trajectory.push_back({step, w, lr, g.report});
    adam_step(adam, res.params.theta, g.gradient, lr);
  }
  return res;
}

OutputScaling OutputScaling::identity(std::size_t outputs) {
  return {std::vector<double>(outputs, 0.0), std::vector<double>(outputs, 1.0)};
}

double log_mean_exp(std::span<const double> xs) {
  if (xs.empty()) throw DomainError("log_mean_exp: empty input");
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s / static_cast<double>(xs.size()));
}

Prediction predict(const ModelParams& params, const DWPConfig& cfg, Family family,
                   const DenseMatrix& x_test, const std::optional<DenseMatrix>& y_test,
                   const OutputScaling& scaling, const PredictOptions& options, RandomStream& rng) {
  check_params(params);
  if (options.n_samples == 0) throw DomainError("predict: n_samples must be >= 1");
  const std::size_t rows = x_test.rows();
  const std::size_t outs = cfg.output_dim;
  if (scaling.mean.size() != outs || scaling.stddev.size() != outs) {
    throw ShapeMismatch("predict: output scaling does not match output_dim");
  }
  if (y_test && (y_test->rows() != rows || y_test->cols() != outs)) {
    throw ShapeMismatch("predict: targets do not match test inputs");
  }
  const auto cp = constrain<double>(params.layout, params.theta, cfg, family);
  const double noise = cp.noise;

  const std::size_t ns = options.n_samples;
  std::vector<ForwardResult<double>> passes;
  passes.reserve(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    const auto nz = options.zero_noise ? SampleNoise::zeros(cfg, rows) : SampleNoise::draw(cfg, rows, rng);
    passes.push_back(forward(cp, cfg, x_test, nz));
  }

  Prediction pr;
  pr.mean = DenseMatrix(rows, outs);
  pr.variance = DenseMatrix(rows, outs);
  if (y_test) pr.log_lik = DenseMatrix(rows, outs);
  std::vector<double> lps(ns);
  double sq = 0.0;
  double ll_sum = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < outs; ++c) {
      double m1 = 0.0;
      double m2 = 0.0;
      for (std::size_t s = 0; s < ns; ++s) {
        const double mu = passes[s].mean(r, c);
        const double v = passes[s].variance[r] + noise;
        m1 += mu;
        m2 += v + mu * mu;
        if (y_test) {
          const double d = (*y_test)(r, c) - mu;
          lps[s] = -0.5 * (kLogTwoPi + std::log(v)) - 0.5 * d * d / v;
        }
      }
      m1 /= static_cast<double>(ns);
      m2 /= static_cast<double>(ns);
      const double sd = scaling.stddev[c];
      pr.mean(r, c) = m1 * sd + scaling.mean[c];
      pr.variance(r, c) = std::max(m2 - m1 * m1, 0.0) * sd * sd;
      if (y_test) {
        const double ll = log_mean_exp(lps) - std::log(sd);
        pr.log_lik(r, c) = ll;
        ll_sum += ll;
        const double err = (m1 - (*y_test)(r, c)) * sd;
        sq += err * err;
      }
    }
  if (y_test && rows > 0) {
    const double count = static_cast<double>(rows * outs);
    pr.mean_log_lik = ll_sum / count;
    pr.rmse = std::sqrt(sq / count);
  }
  return pr;
}

}  // namespace dwpkit::vi
