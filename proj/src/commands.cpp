#include "dwpkit/commands.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "dwpkit/checkpoint.hpp"
#include "dwpkit/dataset.hpp"
#include "dwpkit/distributions.hpp"
#include "dwpkit/verify.hpp"
#include "dwpkit/vi.hpp"
#include "json_util.hpp"

namespace dwpkit::cli {

using jsonio::json;
using jsonio::Reader;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitBadInput = 2;

std::string fmt(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Parsed config plus the resolved seed; an absent config reads as {}.
struct Context {
  json doc = json::object();
  std::uint64_t seed = 0;
  const CommandArgs* args = nullptr;
  std::ostream* out = nullptr;
  std::ostream* log = nullptr;

  Reader root() const { return Reader(doc, ""); }
};

Context load_context(const CommandArgs& args, std::ostream& out, std::ostream& log, bool required) {
  Context c;
  c.args = &args;
  c.out = &out;
  c.log = &log;
  std::string text;
  if (args.config_path) {
    std::ifstream in(*args.config_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config '" + *args.config_path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  } else if (args.config_text) {
    text = *args.config_text;
  } else if (required) {
    throw ConfigError("this command needs --config");
  }
  if (!text.empty()) {
    try {
      c.doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    jsonio::require_schema(c.root());
  }
  c.seed = args.seed ? *args.seed : c.root().count("seed", 0);
  return c;
}

// Writes to --out when given, else to the primary stream.
class Sink {
 public:
  explicit Sink(const Context& c) {
    if (c.args->out) {
      file_.open(*c.args->out, std::ios::binary);
      if (!file_) throw ConfigError("cannot write '" + *c.args->out + "'");
      stream_ = &file_;
    } else {
      stream_ = c.out;
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_ = nullptr;
};

void print_reports(std::ostream& os, const std::vector<stats::StatReport>& reports) {
  for (const auto& r : reports) {
    os << (r.passed ? "PASS " : "FAIL ") << r.name << " statistic=" << fmt(r.statistic)
       << " critical=" << fmt(r.critical) << "\n";
  }
}

int report_exit(std::ostream& log, const char* what, const std::vector<stats::StatReport>& reports) {
  std::size_t failed = 0;
  for (const auto& r : reports) failed += r.passed ? 0 : 1;
  log << what << ": " << reports.size() << " checks, " << failed << " failed\n";
  return failed == 0 ? kExitOk : kExitFailed;
}

// ---- distribution queries ----

enum class DistFamily { Wishart, GW, AGW, ABGW };

struct DistSpec {
  DistFamily family = DistFamily::ABGW;
  dist::ABGWParams<double> abgw;  // every family is sampled through this form
  std::optional<dist::GWParams<double>> gw;
};

dist::GeneralizedBartlettParams<double> read_bartlett(const Reader& r, std::size_t p, std::size_t nu) {
  r.only({"alpha", "beta", "mu", "sigma"});
  dist::GeneralizedBartlettParams<double> b;
  b.P = p;
  b.nu = nu;
  b.alpha = r.numbers("alpha");
  b.beta = r.numbers("beta");
  b.mu = r.matrix("mu");
  b.sigma = r.matrix("sigma");
  try {
    b.validate();
  } catch (const Error& e) {
    r.fail(e.what());
  }
  return b;
}

DistSpec read_dist(const Reader& r) {
  DistSpec d;
  const std::string fam = r.string("family");
  if (fam == "wishart") d.family = DistFamily::Wishart;
  else if (fam == "gw") d.family = DistFamily::GW;
  else if (fam == "agw") d.family = DistFamily::AGW;
  else if (fam == "abgw") d.family = DistFamily::ABGW;
  else r.fail_at("family", "expected one of wishart, gw, agw, abgw");

  const bool scaled = d.family == DistFamily::Wishart || d.family == DistFamily::GW;
  const char* matrix_key = scaled ? "scale" : "A";
  std::size_t p = 0;
  if (r.has("P")) p = r.count("P");
  DenseMatrix m;
  if (r.has(matrix_key)) {
    m = r.matrix(matrix_key);
    if (!m.is_square()) r.fail_at(matrix_key, "expected a square matrix");
    if (p != 0 && m.rows() != p) r.fail_at(matrix_key, "expected " + shape_string(p, p));
    p = m.rows();
  } else if (!scaled) {
    r.fail_at("A", "missing required field");
  }
  if (p == 0) r.fail_at("P", "missing required field (or give " + std::string(matrix_key) + ")");
  if (!scaled && r.has("scale")) r.fail_at("scale", "only used by the wishart and gw families");
  if (scaled && r.has("A")) r.fail_at("A", "only used by the agw and abgw families");
  if (d.family != DistFamily::ABGW && r.has("B")) r.fail_at("B", "only used by the abgw family");
  if (d.family == DistFamily::Wishart && r.has("bartlett")) {
    r.fail_at("bartlett", "the wishart family uses the standard Bartlett parameters");
  }
  const std::size_t nu = r.count("nu");
  if (nu == 0) r.fail_at("nu", "must be >= 1");
  const std::size_t k = dist::nu_tilde(p, nu);

  d.abgw.nu = nu;
  d.abgw.bartlett = r.has("bartlett") ? read_bartlett(r.object("bartlett"), p, nu)
                                      : dist::bartlett_prior_params(p, nu);
  if (scaled) {
    if (m.rows() == 0) m = DenseMatrix::identity(p);
    linalg::LowerTriangular<double> l;
    try {
      l = linalg::cholesky(linalg::SymmetricPsd<double>(m));
    } catch (const Error& e) {
      r.fail_at("scale", e.what());
    }
    d.gw = dist::GWParams<double>{l, nu, d.abgw.bartlett};
    d.abgw.A = l.matrix();
    d.abgw.B = linalg::LowerTriangular<double>::identity(k);
  } else {
    d.abgw.A = m;
    if (d.family == DistFamily::ABGW) {
      const DenseMatrix b = r.matrix("B");
      if (b.rows() != k || b.cols() != k) r.fail_at("B", "expected " + shape_string(k, k));
      try {
        d.abgw.B = linalg::LowerTriangular<double>(b);
      } catch (const Error& e) {
        r.fail_at("B", e.what());
      }
      for (std::size_t j = 0; j < k; ++j)
        if (!(b(j, j) > 0.0)) r.fail_at("B", "diagonal must be positive");
    } else {
      d.abgw.B = linalg::LowerTriangular<double>::identity(k);
    }
  }
  return d;
}

double dist_logpdf(const DistSpec& d, const linalg::SymmetricPsd<double>& g,
                   const dist::BartlettFactor<double>& t) {
  switch (d.family) {
    case DistFamily::Wishart:
      return dist::log_density_wishart(g, d.gw->scale_chol, d.abgw.nu);
    case DistFamily::GW:
      return dist::log_density_gw(t, *d.gw);
    case DistFamily::AGW:
      return dist::log_density_agw(t, d.abgw.A, d.abgw.nu, d.abgw.bartlett);
    case DistFamily::ABGW:
      return dist::log_density_abgw(t, d.abgw);
  }
  return 0.0;
}

std::string gram_header(std::size_t p) {
  std::string h;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j <= i; ++j) h += "g_" + std::to_string(i) + "_" + std::to_string(j) + ",";
  return h;
}

int cmd_sample(const Context& c) {
  const Reader r = c.root();
  r.only({"schema", "seed", "family", "P", "nu", "A", "B", "scale", "bartlett", "n"});
  const DistSpec d = read_dist(r);
  const std::size_t n = r.count("n");
  const std::size_t p = d.abgw.A.rows();
  RandomStream rng(c.seed);
  Sink sink(c);
  *sink << gram_header(p) << "log_q\n";
  for (std::size_t s = 0; s < n; ++s) {
    const auto t = dist::sample_generalized_bartlett(d.abgw.bartlett, rng);
    const auto g = dist::assemble_gram(d.abgw, t).G;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j <= i; ++j) *sink << fmt(g(i, j)) << ",";
    *sink << fmt(dist_logpdf(d, g, t)) << "\n";
  }
  return kExitOk;
}

int cmd_logpdf(const Context& c) {
  const Reader r = c.root();
  r.only({"schema", "seed", "family", "P", "nu", "A", "B", "scale", "bartlett", "input"});
  const DistSpec d = read_dist(r);
  const std::size_t p = d.abgw.A.rows();
  const std::size_t half = p * (p + 1) / 2;
  const auto table = data::read_table(r.string("input"));
  if (table.values.cols() != half && table.values.cols() != half + 1) {
    r.fail_at("input", "expected " + std::to_string(half) + " half-vectorised columns");
  }
  Sink sink(c);
  *sink << "log_q\n";
  for (std::size_t s = 0; s < table.values.rows(); ++s) {
    DenseMatrix g(p, p);
    std::size_t k = 0;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j <= i; ++j) g(i, j) = g(j, i) = table.values(s, k++);
    const linalg::SymmetricPsd<double> gs(g, dist::nu_tilde(p, d.abgw.nu));
    const auto t = dist::recover_T(gs, d.abgw);
    *sink << fmt(dist_logpdf(d, gs, t)) << "\n";
  }
  return kExitOk;
}

// ---- verification suites ----

int cmd_jac_check(const Context& c) {
  const Reader r = c.root();
  r.only({"schema", "seed", "max_p", "max_nu", "trials", "tolerance"});
  verify::JacCheckOptions o;
  o.max_p = r.count("max_p", o.max_p);
  o.max_nu = r.count("max_nu", o.max_nu);
  o.trials = r.count("trials", o.trials);
  o.tolerance = r.number("tolerance", o.tolerance);
  o.seed = c.seed;
  if (o.max_p == 0 || o.max_nu == 0) r.fail("max_p and max_nu must be >= 1");
  const auto reports = verify::jac_check(o);
  Sink sink(c);
  print_reports(*sink, reports);
  return report_exit(*c.log, "jac-check", reports);
}

int cmd_reduction_check(const Context& c) {
  const Reader r = c.root();
  r.only({"schema", "seed", "max_p", "trials", "nesting_tolerance", "wishart_tolerance"});
  verify::ReductionOptions o;
  o.max_p = r.count("max_p", o.max_p);
  o.trials = r.count("trials", o.trials);
  o.nesting_tolerance = r.number("nesting_tolerance", o.nesting_tolerance);
  o.wishart_tolerance = r.number("wishart_tolerance", o.wishart_tolerance);
  o.seed = c.seed;
  if (o.max_p == 0) r.fail_at("max_p", "must be >= 1");
  const auto reports = verify::reduction_check(o);
  Sink sink(c);
  print_reports(*sink, reports);
  return report_exit(*c.log, "reduction-check", reports);
}

// Exit status follows the check against the exact law; the Gamma fit is
// expected to be rejected when mu != 0 and is reported, not asserted.
int cmd_probplot(const Context& c) {
  const Reader r = c.root();
  r.only({"schema", "seed", "mu", "sigma2", "n"});
  const double mu = r.number("mu", 3.0);
  const double sigma2 = r.number("sigma2", 1.0);
  const std::size_t n = r.count("n", 10000);
  verify::ProbplotResult res;
  try {
    res = verify::probplot(mu, sigma2, n, c.seed);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("probplot: ") + e.what());
  }
  Sink sink(c);
  *sink << "gamma_quantile,empirical_quantile\n";
  for (const auto& [q, e] : res.quantiles) *sink << fmt(q) << "," << fmt(e) << "\n";
  *c.log << "gamma fit: shape=" << fmt(res.fit.shape) << " rate=" << fmt(res.fit.rate) << "\n";
  print_reports(*c.log, {res.gamma_ks, res.noncentral_ks});
  return res.noncentral_ks.passed ? kExitOk : kExitFailed;
}

// ---- training and prediction ----

data::SplitSpec read_split(const Reader& r) {
  r.only({"test_fraction", "seed", "train", "test"});
  data::SplitSpec s;
  s.test_fraction = r.number("test_fraction", 0.0);
  s.seed = r.count("seed", 0);
  if (r.has("train")) s.train = r.counts("train");
  if (r.has("test")) s.test = r.counts("test");
  if ((s.train || s.test) && r.has("test_fraction")) {
    r.fail("give either explicit row lists or test_fraction");
  }
  return s;
}

data::Dataset read_data(const Reader& r) {
  r.only({"path", "target", "synthetic", "split"});
  const data::SplitSpec split = r.has("split") ? read_split(r.object("split")) : data::SplitSpec{};
  if (r.has("synthetic") == r.has("path")) r.fail("give exactly one of path and synthetic");
  try {
    if (r.has("synthetic")) {
      const Reader s = r.object("synthetic");
      s.only({"n", "noise_sd", "seed"});
      if (r.has("target")) r.fail_at("target", "synthetic data has a fixed target");
      return data::synthetic_regression(s.count("n"), s.count("seed", 0), s.number("noise_sd", 0.1), split);
    }
    data::ColumnRef target = -1L;
    if (r.has("target")) {
      const json& t = r.raw("target");
      if (t.is_string()) target = t.get<std::string>();
      else if (t.is_number_integer()) target = t.get<long>();
      else r.fail_at("target", "expected a column name or index");
    }
    return data::ingest_csv(r.string("path"), target, split);
  } catch (const ConfigError& e) {
    if (std::string(e.what()).rfind(r.path(), 0) == 0) throw;
    throw ConfigError(r.path() + ": " + e.what());
  }
}

vi::Family read_family(const Reader& r) {
  try {
    return vi::parse_family(r.string("family", "abgw"));
  } catch (const Error& e) {
    if (std::string(e.what()).rfind("family", 0) == 0) throw;
    r.fail_at("family", e.what());
  }
}

vi::TrainConfig read_schedule(const Reader& r) {
  r.only({"steps", "lr_initial", "lr_final", "lr_drop_step", "anneal_steps", "n_samples", "gradient"});
  vi::TrainConfig t;
  t.steps = r.count("steps", t.steps);
  t.lr_initial = r.number("lr_initial", t.lr_initial);
  t.lr_final = r.number("lr_final", t.lr_final);
  if (r.has("lr_drop_step")) t.lr_drop_step = r.count("lr_drop_step");
  if (r.has("anneal_steps")) t.anneal_steps = r.count("anneal_steps");
  t.n_samples = r.count("n_samples", t.n_samples);
  if (t.n_samples == 0) r.fail_at("n_samples", "must be >= 1");
  const std::string g = r.string("gradient", "reverse-mode");
  if (g == "reverse-mode") t.method = vi::GradientMethod::ReverseMode;
  else if (g == "finite-difference") t.method = vi::GradientMethod::FiniteDifference;
  else r.fail_at("gradient", "expected reverse-mode or finite-difference");
  return t;
}

std::string metrics_header(std::size_t depth) {
  std::string h = "step,elbo_total";
  for (std::size_t l = 1; l <= depth; ++l) h += ",layer" + std::to_string(l);
  return h + ",final_term,expected_loglik,anneal,learning_rate\n";
}

int cmd_train(const Context& c) {
  const Reader r = c.root();
  r.only({"schema", "seed", "family", "model", "data", "train", "init", "checkpoint", "metrics"});
  const vi::Family family = read_family(r);
  const data::Dataset ds = read_data(r.object("data"));
  static const json kEmpty = json::object();
  const model::DWPConfig cfg = jsonio::read_model(
      r.has("model") ? r.object("model") : Reader(kEmpty, "model"), ds.input_dim(), 1);
  if (cfg.input_dim != ds.input_dim() || cfg.output_dim != 1) {
    r.fail_at("model", "input_dim/output_dim disagree with the data");
  }
  const vi::TrainConfig schedule =
      read_schedule(r.has("train") ? r.object("train") : Reader(kEmpty, "train"));
  const std::string init = r.string("init", "default");
  if (init != "default" && init != "prior") r.fail_at("init", "expected default or prior");

  std::string ckpt_path;
  if (c.args->out) ckpt_path = *c.args->out;
  else if (r.has("checkpoint")) ckpt_path = r.string("checkpoint");
  else r.fail_at("checkpoint", "train needs --out or a checkpoint path");
  std::string metrics_path = r.string("metrics", "");
  if (metrics_path.empty()) {
    metrics_path = std::filesystem::path(ckpt_path).replace_extension(".metrics.csv").string();
  }

  const vi::RegressionData train_data = ds.train_data();
  RandomStream rng(c.seed);
  vi::ModelParams start = vi::init_params(cfg, train_data.x, rng);
  if (init == "prior") vi::match_conditional_prior(start, cfg);
  const vi::TrainResult res = vi::train(train_data, cfg, family, schedule, rng, &start);

  io::save_checkpoint({family, c.seed, cfg, res.params, ds.norm}, ckpt_path);
  std::ofstream m(metrics_path, std::ios::binary);
  if (!m) throw ConfigError("cannot write metrics '" + metrics_path + "'");
  m << metrics_header(cfg.depth);
  for (const auto& s : res.trajectory) {
    m << s.step << "," << fmt(s.report.total);
    for (double t : s.report.layer_terms) m << "," << fmt(t);
    m << "," << fmt(s.report.final_term) << "," << fmt(s.report.expected_loglik) << ","
      << fmt(s.anneal) << "," << fmt(s.learning_rate) << "\n";
  }
  if (!res.trajectory.empty()) {
    *c.log << "train: " << vi::family_name(family) << " steps=" << res.trajectory.size()
           << " first elbo=" << fmt(res.trajectory.front().report.total)
           << " last elbo=" << fmt(res.trajectory.back().report.total) << "\n";
  }
  *c.log << "checkpoint: " << ckpt_path << "\nmetrics: " << metrics_path << "\n";
  return kExitOk;
}

struct Evaluation {
  io::Checkpoint ckpt;
  DenseMatrix x;  // normalised with the checkpoint's statistics
  DenseMatrix y;
  DenseMatrix raw_y;
};

Evaluation read_evaluation(const Reader& r, const char* default_rows) {
  Evaluation e;
  e.ckpt = io::load_checkpoint(r.string("checkpoint"));
  const data::Dataset ds = read_data(r.object("data"));
  if (ds.input_dim() != e.ckpt.config.input_dim) {
    r.fail_at("data", "has " + std::to_string(ds.input_dim()) + " inputs, the checkpoint expects " +
                          std::to_string(e.ckpt.config.input_dim));
  }
  const std::string which = r.string("rows", default_rows);
  std::vector<std::size_t> rows;
  if (which == "train") rows = ds.train_rows;
  else if (which == "test") rows = ds.test_rows;
  else if (which == "all") rows = [&] {
    std::vector<std::size_t> all(ds.raw.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }();
  else r.fail_at("rows", "expected train, test or all");
  if (rows.empty()) r.fail_at("rows", "selects no rows");
  e.x = e.ckpt.norm.x.apply(ds.raw_inputs(rows));
  e.raw_y = ds.raw_targets(rows);
  e.y = e.ckpt.norm.y.apply(e.raw_y);
  return e;
}

int cmd_predict(const Context& c) {
  const Reader r = c.root();
  r.only({"schema", "seed", "checkpoint", "data", "rows", "n_samples"});
  const Evaluation e = read_evaluation(r, "test");
  vi::PredictOptions opts;
  opts.n_samples = r.count("n_samples", opts.n_samples);
  if (opts.n_samples == 0) r.fail_at("n_samples", "must be >= 1");
  RandomStream rng(c.seed);
  const auto pred = vi::predict(e.ckpt.params, e.ckpt.config, e.ckpt.family, e.x, e.y,
                                e.ckpt.norm.output_scaling(), opts, rng);
  Sink sink(c);
  *sink << "row,mean,variance,target,log_lik\n";
  for (std::size_t i = 0; i < pred.mean.rows(); ++i) {
    *sink << i << "," << fmt(pred.mean(i, 0)) << "," << fmt(pred.variance(i, 0)) << ","
          << fmt(e.raw_y(i, 0)) << "," << fmt(pred.log_lik(i, 0)) << "\n";
  }
  *c.log << "rmse=" << fmt(*pred.rmse) << " mean_log_lik=" << fmt(*pred.mean_log_lik) << "\n";
  return kExitOk;
}

int cmd_elbo(const Context& c) {
  const Reader r = c.root();
  r.only({"schema", "seed", "checkpoint", "data", "rows", "n_samples"});
  const Evaluation e = read_evaluation(r, "train");
  const std::size_t n = r.count("n_samples", 10);
  if (n == 0) r.fail_at("n_samples", "must be >= 1");
  RandomStream rng(c.seed);
  const vi::RegressionData d{e.x, e.y};
  const auto rep = vi::elbo_estimate(e.ckpt.params, d, e.ckpt.config, e.ckpt.family, n, rng);
  Sink sink(c);
  *sink << "family " << vi::family_name(e.ckpt.family) << "\n";
  *sink << "n_samples " << rep.n_samples << "\n";
  *sink << "total " << fmt(rep.total) << "\n";
  for (std::size_t l = 0; l < rep.layer_terms.size(); ++l)
    *sink << "layer" << l + 1 << " " << fmt(rep.layer_terms[l]) << "\n";
  *sink << "final_term " << fmt(rep.final_term) << "\n";
  *sink << "expected_loglik " << fmt(rep.expected_loglik) << "\n";
  *sink << "per_datapoint " << fmt(rep.total / static_cast<double>(d.x.rows())) << "\n";
  return kExitOk;
}

struct Command {
  std::function<int(const Context&)> run;
  bool needs_config;
};

const std::map<std::string, Command>& registry() {
  static const std::map<std::string, Command> r = {
      {"sample", {cmd_sample, true}},
      {"logpdf", {cmd_logpdf, true}},
      {"jac-check", {cmd_jac_check, false}},
      {"reduction-check", {cmd_reduction_check, false}},
      {"probplot", {cmd_probplot, false}},
      {"train", {cmd_train, true}},
      {"predict", {cmd_predict, true}},
      {"elbo", {cmd_elbo, true}},
  };
  return r;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"sample", "logpdf", "jac-check", "reduction-check",
                                                 "probplot", "train", "predict", "elbo"};
  return names;
}

int run_command(const std::string& name, const CommandArgs& args, std::ostream& out,
                std::ostream& log) {
  const auto it = registry().find(name);
  if (it == registry().end()) {
    log << "error: unknown command '" << name << "'\n";
    return kExitBadInput;
  }
  try {
    const Context c = load_context(args, out, log, it->second.needs_config);
    return it->second.run(c);
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const ParseError& e) {
    log << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const ConstantColumn& e) {
    log << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitFailed;
  }
}

}  // namespace dwpkit::cli
