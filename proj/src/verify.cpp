#include "dwpkit/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/distributions/gamma.hpp>

#include "dwpkit/jacobians.hpp"

namespace dwpkit::verify {

namespace {

double rel_error(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

std::string shape_tag(std::size_t p, std::size_t nu) {
  return "(P=" + std::to_string(p) + ",nu=" + std::to_string(nu) + ")";
}

// Strict comparison so a zero tolerance fails even an exact match.
StatReport strict_report(std::string name, double statistic, double critical) {
  return {std::move(name), statistic, critical, statistic < critical};
}

DenseMatrix positive_trapezoid(RandomStream& rng, std::size_t p, std::size_t k) {
  DenseMatrix t(p, k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    t(j, j) = 0.5 + rng.uniform();
    for (std::size_t i = j + 1; i < p; ++i) t(i, j) = rng.normal();
  }
  return t;
}

// Squared ratio of the largest to smallest Cholesky pivot: a cheap
// condition estimate for an SPD block.
double pivot_spread(const DenseMatrix& spd) {
  const auto l = linalg::cholesky(linalg::SymmetricPsd<double>(spd), linalg::JitterPolicy::none());
  double hi = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < spd.rows(); ++i) {
    hi = std::max(hi, l(i, i));
    lo = std::min(lo, l(i, i));
  }
  return (hi / lo) * (hi / lo);
}

// The rank chart and the leading-minor terms degenerate as the leading
// block of A C A^T approaches singularity; fixed-step FD loses accuracy there.
constexpr double kMaxLeadSpread = 100.0;

}  // namespace

linalg::LowerTriangular<double> random_lower(RandomStream& rng, std::size_t n) {
  DenseMatrix m(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = 0.5 + 1.5 * rng.uniform();
    for (std::size_t j = 0; j < i; ++j) m(i, j) = 0.5 * rng.normal();
  }
  return linalg::LowerTriangular<double>(std::move(m));
}

DenseMatrix random_invertible(RandomStream& rng, std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = (i == j ? 1.5 : 0.0) + 0.4 * rng.normal();
  return m;
}

dist::GeneralizedBartlettParams<double> random_bartlett(RandomStream& rng, std::size_t p,
                                                        std::size_t nu) {
  auto b = dist::bartlett_prior_params(p, nu);
  for (std::size_t j = 0; j < b.nu_tilde(); ++j) {
    b.alpha[j] = 0.5 + 3.0 * rng.uniform();
    b.beta[j] = 0.3 + 2.0 * rng.uniform();
    for (std::size_t i = j + 1; i < p; ++i) {
      b.mu(i, j) = rng.normal();
      b.sigma(i, j) = 0.3 + rng.uniform();
    }
  }
  return b;
}

dist::ABGWParams<double> random_abgw(RandomStream& rng, std::size_t p, std::size_t nu) {
  auto b = random_bartlett(rng, p, nu);
  const std::size_t k = b.nu_tilde();
  return {random_invertible(rng, p), random_lower(rng, k), nu, std::move(b)};
}

std::vector<StatReport> jac_check(const JacCheckOptions& opts) {
  std::vector<StatReport> out;
  if (opts.trials == 0) return out;
  if (opts.max_p == 0 || opts.max_nu == 0) throw DomainError("jac_check: bounds must be >= 1");
  RandomStream rng(opts.seed);
  using jac::CoordinateChart;
  const double chain_critical = std::min(1e-8, opts.tolerance);
  for (std::size_t p = 1; p <= opts.max_p; ++p)
    for (std::size_t nu = 1; nu <= std::min(p, opts.max_nu); ++nu) {
      const auto trap = CoordinateChart::trapezoid(p, nu);
      const auto out_chart = nu == p ? CoordinateChart::symmetric_half(p)
                                     : CoordinateChart::symmetric_half_rank(p, nu);
      double e_square = 0.0, e_rect = 0.0, e_left = 0.0, e_right = 0.0, e_cong = 0.0, e_chain = 0.0;
      for (std::size_t trial = 0; trial < opts.trials; ++trial) {
        const DenseMatrix t = positive_trapezoid(rng, p, nu);
        const auto x = trap.extract(t);

        const double fd_rect =
            jac::numeric_logjac([](const DenseMatrix& m) { return outer_gram(m); }, x, trap, out_chart)
                .value;
        e_rect = std::max(e_rect, rel_error(jac::logjac_chol_rect(t).value, fd_rect));
        if (nu == p) {
          e_square = std::max(
              e_square, rel_error(jac::logjac_chol_square(linalg::LowerTriangular<double>(t)).value, fd_rect));
        }

        const auto l = random_lower(rng, p);
        const double fd_left =
            jac::numeric_logjac([&](const DenseMatrix& m) { return l.matrix() * m; }, x, trap, trap).value;
        e_left = std::max(e_left, rel_error(jac::logjac_left_lower(l, nu).value, fd_left));

        const auto b = random_lower(rng, nu);
        const double fd_right =
            jac::numeric_logjac([&](const DenseMatrix& m) { return m * b.matrix(); }, x, trap, trap).value;
        e_right = std::max(e_right, rel_error(jac::logjac_right_lower(b, p).value, fd_right));

        const DenseMatrix cm = outer_gram(t);
        DenseMatrix a = random_invertible(rng, p);
        DenseMatrix dm = a * cm * transpose(a);
        while (nu < p && pivot_spread(dm.block(0, 0, nu, nu)) > kMaxLeadSpread) {
          a = random_invertible(rng, p);
          dm = a * cm * transpose(a);
        }
        const auto map = [&](const DenseMatrix& m) { return a * m * transpose(a); };
        const double fd_cong = jac::numeric_logjac(map, out_chart.extract(cm), out_chart, out_chart).value;
        const double analytic =
            jac::logjac_congruence(a, linalg::log_abs_det(cm.block(0, 0, nu, nu)),
                                   linalg::log_abs_det(dm.block(0, 0, nu, nu)), nu, p)
                .value;
        e_cong = std::max(e_cong, rel_error(analytic, fd_cong));

        const auto params = random_abgw(rng, p, nu);
        const auto tf = dist::sample_generalized_bartlett(params.bartlett, rng);
        e_chain = std::max(e_chain, std::abs(dist::log_density_abgw(tf, params) -
                                             jac::chain_terms(tf, params).log_q_g()));
      }
      const std::string tag = shape_tag(p, nu);
      if (nu == p) out.push_back(strict_report("chol_square" + tag, e_square, opts.tolerance));
      out.push_back(strict_report("chol_rect" + tag, e_rect, opts.tolerance));
      out.push_back(strict_report("left_lower" + tag, e_left, opts.tolerance));
      out.push_back(strict_report("right_lower" + tag, e_right, opts.tolerance));
      out.push_back(strict_report("congruence" + tag, e_cong, opts.tolerance));
      out.push_back(strict_report("chain" + tag, e_chain, chain_critical));
    }
  return out;
}

std::vector<StatReport> chain_check(std::size_t max_p, std::size_t trials, std::uint64_t seed,
                                    double tolerance) {
  RandomStream rng(seed);
  double e_general = 0.0;
  double e_identity = 0.0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const std::size_t p = 1 + trial % max_p;
    const std::size_t nu = 1 + (trial / max_p) % p;
    auto params = random_abgw(rng, p, nu);
    const auto t = dist::sample_generalized_bartlett(params.bartlett, rng);
    e_general = std::max(e_general, std::abs(dist::log_density_abgw(t, params) -
                                             jac::chain_terms(t, params).log_q_g()));
    params.B = linalg::LowerTriangular<double>::identity(params.bartlett.nu_tilde());
    e_identity = std::max(e_identity, std::abs(dist::log_density_abgw(t, params) -
                                               jac::chain_terms(t, params).log_q_g()));
  }
  return {{"chain(abgw)", e_general, tolerance, e_general <= tolerance},
          {"chain(B=I)", e_identity, tolerance, e_identity <= tolerance}};
}

std::vector<StatReport> reduction_check(const ReductionOptions& opts) {
  RandomStream rng(opts.seed);
  double e_agw = 0.0;
  double e_gw = 0.0;
  double e_wishart = 0.0;
  for (std::size_t trial = 0; trial < opts.trials; ++trial) {
    const std::size_t p = 1 + trial % opts.max_p;
    const std::size_t nu = 1 + (trial / opts.max_p) % p;
    auto params = random_abgw(rng, p, nu);
    params.B = linalg::LowerTriangular<double>::identity(params.bartlett.nu_tilde());
    const auto t = dist::sample_generalized_bartlett(params.bartlett, rng);
    e_agw = std::max(e_agw, std::abs(dist::log_density_abgw(t, params) -
                                     dist::log_density_agw(t, params.A, nu, params.bartlett)));

    const auto l = random_lower(rng, p);
    e_gw = std::max(e_gw, std::abs(dist::log_density_agw(t, l.matrix(), nu, params.bartlett) -
                                   dist::log_density_gw(t, dist::GWParams<double>{l, nu, params.bartlett})));

    const auto prior = dist::bartlett_prior_params(p, nu);
    const auto tp = dist::sample_generalized_bartlett(prior, rng);
    const dist::GWParams<double> gw{l, nu, prior};
    const auto g = dist::assemble_gram(dist::abgw_from_gw(gw), tp);
    e_wishart = std::max(e_wishart, std::abs(dist::log_density_gw(tp, gw) -
                                             dist::log_density_wishart(g.G, l, nu)));
  }
  return {{"abgw(B=I)=agw", e_agw, opts.nesting_tolerance, e_agw <= opts.nesting_tolerance},
          {"agw(lower A)=gw", e_gw, opts.nesting_tolerance, e_gw <= opts.nesting_tolerance},
          {"gw(prior)=wishart", e_wishart, opts.wishart_tolerance, e_wishart <= opts.wishart_tolerance}};
}

StatReport round_trip_check(std::size_t max_p, std::size_t trials, std::uint64_t seed,
                            double tolerance) {
  RandomStream rng(seed);
  double worst = 0.0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const std::size_t p = 1 + trial % max_p;
    const std::size_t nu = 1 + rng.next_u64() % (p + 2);
    const auto params = random_abgw(rng, p, nu);
    const auto t = dist::sample_generalized_bartlett(params.bartlett, rng);
    const auto g = dist::assemble_gram(params, t);
    const auto back = dist::recover_T(g.G, params);
    worst = std::max(worst, max_abs_diff(back.matrix(), t.matrix()) / max_abs(t.matrix()));
  }
  return {"round_trip", worst, tolerance, worst <= tolerance};
}

StatReport moment_check(std::size_t p, std::size_t nu, std::size_t n, std::uint64_t seed,
                        double max_z) {
  RandomStream rng(seed);
  DenseMatrix sigma(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) sigma(i, j) = i == j ? 1.0 + 0.5 * static_cast<double>(i) : 0.3;
  const double z = dist::wishart_mean_check(linalg::SymmetricPsd<double>(sigma), nu, n, rng);
  return {"wishart_mean" + shape_tag(p, nu), z, max_z, z <= max_z};
}

ProbplotResult probplot(double mu, double sigma2, std::size_t n, std::uint64_t seed) {
  if (n < 100) throw DomainError("probplot: n must be >= 100");
  if (!(sigma2 > 0.0)) throw DomainError("probplot: sigma2 must be positive");
  RandomStream rng(seed);
  const DenseMatrix a = DenseMatrix::from_rows({{1.0, 1.0}, {0.0, 1.0}});
  ProbplotResult r;
  r.samples.reserve(n);
  const double sd = std::sqrt(sigma2);
  for (std::size_t s = 0; s < n; ++s) {
    DenseMatrix t(2, 1);
    t(0, 0) = rng.normal();
    t(1, 0) = rng.normal(mu, sd);
    const DenseMatrix at = a * t;
    r.samples.push_back(outer_gram(at)(0, 0));
  }
  std::sort(r.samples.begin(), r.samples.end());
  r.fit = stats::gamma_mle_fit(r.samples);
  const boost::math::gamma_distribution<double> fitted(r.fit.shape, 1.0 / r.fit.rate);
  r.quantiles.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    r.quantiles.emplace_back(boost::math::quantile(fitted, u), r.samples[i]);
  }
  r.gamma_ks = stats::ks_statistic(
      r.samples, [&](double x) { return boost::math::cdf(fitted, x); }, "ks_vs_fitted_gamma");
  const double scale = sigma2 + 1.0;
  const double lambda = mu * mu / scale;
  r.noncentral_ks = stats::ks_statistic(
      r.samples, [&](double x) { return stats::noncentral_chi2_cdf(x / scale, 1.0, lambda); },
      "ks_vs_noncentral_chi2");
  return r;
}

}  // namespace dwpkit::verify
