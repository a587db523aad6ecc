#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "dwpkit/checkpoint.hpp"
#include "dwpkit/commands.hpp"
#include "dwpkit/dataset.hpp"
#include "dwpkit/distributions.hpp"
#include "dwpkit/verify.hpp"
#include "dwpkit/vi.hpp"

namespace py = pybind11;
using namespace dwpkit;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

DenseMatrix to_matrix(const Array& a, const char* what) {
  if (a.ndim() == 1) {
    DenseMatrix m(static_cast<std::size_t>(a.shape(0)), 1);
    std::copy(a.data(), a.data() + a.size(), m.data());
    return m;
  }
  if (a.ndim() != 2) throw py::value_error(std::string(what) + " must be 1-D or 2-D");
  DenseMatrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data());
  return m;
}

Array to_array(const DenseMatrix& m) {
  Array a({m.rows(), m.cols()});
  std::copy(m.data(), m.data() + m.size(), a.mutable_data());
  return a;
}

py::dict report_dict(const stats::StatReport& r) {
  py::dict d;
  d["name"] = r.name;
  d["statistic"] = r.statistic;
  d["critical"] = r.critical;
  d["passed"] = r.passed;
  return d;
}

py::list report_list(const std::vector<stats::StatReport>& rs) {
  py::list l;
  for (const auto& r : rs) l.append(report_dict(r));
  return l;
}

dist::ABGWParams<double> abgw_params(const Array& a, const Array& b, std::size_t nu) {
  const DenseMatrix am = to_matrix(a, "A");
  const std::size_t k = dist::nu_tilde(am.rows(), nu);
  const DenseMatrix bm = b.size() == 0 ? DenseMatrix::identity(k) : to_matrix(b, "B");
  return {am, linalg::LowerTriangular<double>(bm), nu, dist::bartlett_prior_params(am.rows(), nu)};
}

vi::Family family_of(const std::string& s) { return vi::parse_family(s); }

}  // namespace

PYBIND11_MODULE(dwpkit, m) {
  m.doc() = "Generalised Wishart densities, their verification suites and deep Wishart process inference.";

  py::register_exception<Error>(m, "Error");

  m.def(
      "sample_abgw",
      [](const Array& a, const Array& b, std::size_t nu, std::size_t n, std::uint64_t seed) {
        const auto params = abgw_params(a, b, nu);
        const std::size_t p = params.A.rows();
        RandomStream rng(seed);
        py::array_t<double> grams({n, p, p});
        Array logq(static_cast<py::ssize_t>(n));
        auto g = grams.mutable_unchecked<3>();
        for (std::size_t s = 0; s < n; ++s) {
          const auto t = dist::sample_generalized_bartlett(params.bartlett, rng);
          const auto gs = dist::assemble_gram(params, t).G;
          for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < p; ++j) g(s, i, j) = gs(i, j);
          logq.mutable_data()[s] = dist::log_density_abgw(t, params);
        }
        return py::make_tuple(grams, logq);
      },
      py::arg("A"), py::arg("B") = Array(), py::arg("nu"), py::arg("n"), py::arg("seed") = 0,
      "Draws n Gram matrices A T B B^T T^T A^T with Bartlett-prior T; returns (G, log q(G)).");

  m.def(
      "log_density_abgw",
      [](const Array& g, const Array& a, const Array& b, std::size_t nu) {
        const auto params = abgw_params(a, b, nu);
        const linalg::SymmetricPsd<double> gs(to_matrix(g, "G"), dist::nu_tilde(params.A.rows(), nu));
        return dist::log_density_abgw(dist::recover_T(gs, params), params);
      },
      py::arg("G"), py::arg("A"), py::arg("B") = Array(), py::arg("nu"));

  m.def(
      "log_density_wishart",
      [](const Array& g, const Array& scale, std::size_t nu) {
        const std::size_t p = static_cast<std::size_t>(g.shape(0));
        return dist::log_density_wishart(
            linalg::SymmetricPsd<double>(to_matrix(g, "G"), dist::nu_tilde(p, nu)),
            linalg::SymmetricPsd<double>(to_matrix(scale, "scale")), nu);
      },
      py::arg("G"), py::arg("scale"), py::arg("nu"));

  m.def(
      "jac_check",
      [](std::size_t max_p, std::size_t max_nu, std::size_t trials, double tolerance, std::uint64_t seed) {
        return report_list(verify::jac_check({max_p, max_nu, trials, tolerance, seed}));
      },
      py::arg("max_p") = 5, py::arg("max_nu") = 5, py::arg("trials") = 25, py::arg("tolerance") = 1e-4,
      py::arg("seed") = 0);

  m.def(
      "reduction_check",
      [](std::size_t max_p, std::size_t trials, std::uint64_t seed) {
        verify::ReductionOptions o;
        o.max_p = max_p;
        o.trials = trials;
        o.seed = seed;
        return report_list(verify::reduction_check(o));
      },
      py::arg("max_p") = 6, py::arg("trials") = 100, py::arg("seed") = 0);

  m.def(
      "round_trip_check",
      [](std::size_t max_p, std::size_t trials, std::uint64_t seed) {
        return report_dict(verify::round_trip_check(max_p, trials, seed));
      },
      py::arg("max_p") = 8, py::arg("trials") = 100, py::arg("seed") = 0);

  m.def(
      "probplot",
      [](double mu, double sigma2, std::size_t n, std::uint64_t seed) {
        const auto r = verify::probplot(mu, sigma2, n, seed);
        Array q({r.quantiles.size(), std::size_t{2}});
        for (std::size_t i = 0; i < r.quantiles.size(); ++i) {
          q.mutable_data()[2 * i] = r.quantiles[i].first;
          q.mutable_data()[2 * i + 1] = r.quantiles[i].second;
        }
        py::dict d;
        d["quantiles"] = q;
        d["gamma_shape"] = r.fit.shape;
        d["gamma_rate"] = r.fit.rate;
        d["gamma_ks"] = report_dict(r.gamma_ks);
        d["noncentral_ks"] = report_dict(r.noncentral_ks);
        return d;
      },
      py::arg("mu") = 3.0, py::arg("sigma2") = 1.0, py::arg("n") = 10000, py::arg("seed") = 0);

  m.def("noncentral_chi2_cdf", &stats::noncentral_chi2_cdf, py::arg("x"), py::arg("k"), py::arg("lam"));
  m.def(
      "gamma_mle_fit",
      [](const Array& xs) {
        const auto f = stats::gamma_mle_fit(std::span<const double>(xs.data(), static_cast<std::size_t>(xs.size())));
        return py::make_tuple(f.shape, f.rate);
      },
      py::arg("samples"), "Returns (shape, rate).");

  m.def(
      "train",
      [](const Array& x, const Array& y, const std::string& family, std::vector<std::size_t> widths,
         std::size_t inducing, std::size_t steps, std::size_t n_samples, std::uint64_t seed) {
        const DenseMatrix xm = to_matrix(x, "x");
        const DenseMatrix ym = to_matrix(y, "y");
        if (ym.cols() != 1 || ym.rows() != xm.rows()) throw py::value_error("y must hold one value per row of x");
        DenseMatrix raw(xm.rows(), xm.cols() + 1);
        std::vector<std::string> names;
        for (std::size_t j = 0; j < xm.cols(); ++j) names.push_back("x" + std::to_string(j));
        names.push_back("y");
        for (std::size_t i = 0; i < xm.rows(); ++i) {
          for (std::size_t j = 0; j < xm.cols(); ++j) raw(i, j) = xm(i, j);
          raw(i, xm.cols()) = ym(i, 0);
        }
        const auto ds = data::make_dataset(names, raw, data::ColumnRef{-1L}, {});
        model::DWPConfig cfg;
        cfg.depth = widths.size();
        cfg.widths = std::move(widths);
        cfg.inducing_count = inducing;
        cfg.input_dim = xm.cols();
        vi::TrainConfig schedule;
        schedule.steps = steps;
        schedule.n_samples = n_samples;
        const auto fam = family_of(family);
        RandomStream rng(seed);
        vi::TrainResult res;
        {
          py::gil_scoped_release release;
          res = vi::train(ds.train_data(), cfg, fam, schedule, rng);
        }
        Array elbo(static_cast<py::ssize_t>(res.trajectory.size()));
        for (std::size_t s = 0; s < res.trajectory.size(); ++s) elbo.mutable_data()[s] = res.trajectory[s].report.total;
        return py::make_tuple(io::to_json({fam, seed, cfg, res.params, ds.norm}), elbo);
      },
      py::arg("x"), py::arg("y"), py::arg("family") = "abgw", py::arg("widths") = std::vector<std::size_t>{2, 2},
      py::arg("inducing") = 8, py::arg("steps") = 2000, py::arg("n_samples") = 1, py::arg("seed") = 0,
      "Fits on raw (x, y); returns (checkpoint JSON text, per-step ELBO).");

  m.def(
      "predict",
      [](const std::string& checkpoint, const Array& x, std::optional<Array> y, std::size_t n_samples,
         std::uint64_t seed) {
        const auto c = io::from_json(checkpoint);
        const DenseMatrix xn = c.norm.x.apply(to_matrix(x, "x"));
        std::optional<DenseMatrix> yn;
        if (y) yn = c.norm.y.apply(to_matrix(*y, "y"));
        vi::PredictOptions opts;
        opts.n_samples = n_samples;
        RandomStream rng(seed);
        const auto p = vi::predict(c.params, c.config, c.family, xn, yn, c.norm.output_scaling(), opts, rng);
        py::dict d;
        d["mean"] = to_array(p.mean);
        d["variance"] = to_array(p.variance);
        if (p.rmse) d["rmse"] = *p.rmse;
        if (p.mean_log_lik) d["mean_log_lik"] = *p.mean_log_lik;
        return d;
      },
      py::arg("checkpoint"), py::arg("x"), py::arg("y") = py::none(), py::arg("n_samples") = 100,
      py::arg("seed") = 0, "Predictive mean and variance in original units.");

  m.def(
      "elbo",
      [](const std::string& checkpoint, const Array& x, const Array& y, std::size_t n_samples,
         std::uint64_t seed) {
        const auto c = io::from_json(checkpoint);
        const vi::RegressionData d{c.norm.x.apply(to_matrix(x, "x")), c.norm.y.apply(to_matrix(y, "y"))};
        RandomStream rng(seed);
        const auto r = vi::elbo_estimate(c.params, d, c.config, c.family, n_samples, rng);
        py::dict out;
        out["total"] = r.total;
        out["layer_terms"] = r.layer_terms;
        out["final_term"] = r.final_term;
        out["expected_loglik"] = r.expected_loglik;
        return out;
      },
      py::arg("checkpoint"), py::arg("x"), py::arg("y"), py::arg("n_samples") = 10, py::arg("seed") = 0);

  m.def(
      "run_command",
      [](const std::string& name, const std::string& config, std::optional<std::uint64_t> seed,
         std::optional<std::string> out) {
        cli::CommandArgs args;
        if (!config.empty()) args.config_text = config;
        args.seed = seed;
        args.out = std::move(out);
        std::ostringstream o, l;
        const int code = cli::run_command(name, args, o, l);
        return py::make_tuple(code, o.str(), l.str());
      },
      py::arg("name"), py::arg("config") = "", py::arg("seed") = py::none(), py::arg("out") = py::none(),
      "Runs a command-line verb with a JSON config text; returns (exit code, output, log).");
}
