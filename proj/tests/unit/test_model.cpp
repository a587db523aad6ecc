#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>

#include "dwpkit/model.hpp"
#include "dwpkit/stats.hpp"
#include "helpers.hpp"

using namespace dwpkit;
using namespace dwpkit::model;
using linalg::SymmetricPsd;

namespace {
KernelConfig<double> se(double variance, double lengthscale) {
  return {variance, std::vector<double>{lengthscale}};
}
}  // namespace

TEST_CASE("sqdist_from_gram") {
  CHECK(max_abs_diff(sqdist_from_gram(DenseMatrix::identity(2)),
                     DenseMatrix::from_rows({{0, 2}, {2, 0}})) == 0.0);
  CHECK(max_abs(sqdist_from_gram(DenseMatrix(2, 2, 1.0))) == 0.0);

  RandomStream rng(3);
  const std::size_t nu = 3;
  const DenseMatrix f = testgen::gaussian(rng, 5, nu);
  const DenseMatrix g = (1.0 / nu) * outer_gram(f);
  const DenseMatrix r = sqdist_from_gram(g);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double d = 0.0;
      for (std::size_t c = 0; c < nu; ++c) d += (f(i, c) - f(j, c)) * (f(i, c) - f(j, c));
      CHECK(r(i, j) == doctest::Approx(d / nu).epsilon(1e-12).scale(1.0));
    }
  CHECK(max_abs_diff(sqdist_from_gram(DenseMatrix(2.5 * g)), 2.5 * r) < 1e-12);

  // negative round-off is clamped
  const DenseMatrix near = DenseMatrix::from_rows({{1.0, 1.0 + 1e-15}, {1.0 + 1e-15, 1.0}});
  CHECK(sqdist_from_gram(near)(0, 1) == 0.0);
}

TEST_CASE("kernel_from_gram") {
  RandomStream rng(4);
  const SymmetricPsd<double> g(outer_gram(testgen::gaussian(rng, 4, 2)));
  const auto k = kernel_from_gram(g, se(1.7, 0.8));
  for (std::size_t i = 0; i < 4; ++i) CHECK(k(i, i) == 1.7);

  const SymmetricPsd<double> g2(DenseMatrix::identity(2));  // R_12 = 2
  CHECK(kernel_from_gram(g2, se(1.0, 1.0))(0, 1) == doctest::Approx(std::exp(-1.0)));
  const auto flat = kernel_from_gram(g, se(2.0, 1e8));
  CHECK(max_abs_diff(flat.matrix(), DenseMatrix(4, 4, 2.0)) < 1e-12);

  // PSD after jitter on random Gram inputs
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial % 10;
    const SymmetricPsd<double> gg(outer_gram(testgen::gaussian(rng, n, 1 + trial % 3)));
    CHECK_NOTHROW(linalg::cholesky(kernel_from_gram(gg, se(1.0, 0.5 + rng.uniform()))));
  }

  // permutation equivariance
  const DenseMatrix gm = g.matrix();
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  DenseMatrix pg(4, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) pg(i, j) = gm(perm[i], perm[j]);
  const auto kp = kernel_from_gram(SymmetricPsd<double>(pg), se(1.0, 1.3));
  const auto kk = kernel_from_gram(g, se(1.0, 1.3));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(kp(i, j) == kk(perm[i], perm[j]));
}

TEST_CASE("kernel_ard_inputs") {
  const DenseMatrix same = DenseMatrix::from_rows({{1, 2}, {1, 2}, {1, 2}});
  const KernelConfig<double> cfg{0.7, {1.0, 2.0}};
  CHECK(max_abs_diff(kernel_ard_inputs(same, cfg).matrix(), DenseMatrix(3, 3, 0.7)) == 0.0);
  const auto k = kernel_ard_inputs(DenseMatrix::from_rows({{0}, {1}}), KernelConfig<double>{1.3, {1.0}});
  CHECK(k(0, 1) == doctest::Approx(1.3 * std::exp(-0.5)));

  const KernelConfig<double> ignore{1.0, {0.9, 1e12}};
  const DenseMatrix a = DenseMatrix::from_rows({{0, 5}, {1, -3}});
  const DenseMatrix b = DenseMatrix::from_rows({{0, -7}, {1, 40}});
  CHECK(max_abs_diff(kernel_ard_inputs(a, ignore).matrix(), kernel_ard_inputs(b, ignore).matrix()) < 1e-12);
  CHECK_THROWS_AS(kernel_ard_inputs(a, cfg.lengthscales.size() == 2 ? KernelConfig<double>{1.0, {1.0}} : cfg),
                  ShapeMismatch);
}

TEST_CASE("layer prior") {
  // P = 1: G ~ (K/nu) chi2_nu with K the kernel variance
  const SymmetricPsd<double> prev(DenseMatrix::from_rows({{0.4}}));
  for (std::size_t nu : {1, 2, 5}) {
    const double var = 1.8;
    const double g = 0.9;
    const double sc = var / static_cast<double>(nu);
    const double expected =
        std::log(boost::math::pdf(boost::math::chi_squared(static_cast<double>(nu)), g / sc) / sc);
    const dist::GramSample gs{SymmetricPsd<double>(DenseMatrix::from_rows({{g}})),
                              dist::BartlettFactor<double>(DenseMatrix::from_rows({{1.0}}), nu)};
    CHECK(layer_prior_logpdf(gs, prev, nu, se(var, 1.0)) == doctest::Approx(expected));
  }

  // sampled G_11 is consistent with the density's distribution function
  RandomStream rng(8);
  const std::size_t nu = 3;
  const double var = 1.8;
  std::vector<double> draws(5000);
  for (auto& d : draws) {
    double s = 0.0;
    for (std::size_t c = 0; c < nu; ++c) {
      const double f = rng.normal(0.0, std::sqrt(var / nu));
      s += f * f;
    }
    d = s;
  }
  const auto report = stats::ks_statistic(draws, [&](double x) {
    return boost::math::cdf(boost::math::chi_squared(static_cast<double>(nu)), x * nu / var);
  });
  CHECK(report.passed);
}

TEST_CASE("conditional features") {
  RandomStream rng(12);
  // S_it = 0: mean zero and independent of F_i
  DenseMatrix s = DenseMatrix::identity(3);
  s(2, 2) = 2.0;
  const FeatureBlock<double> fi{DenseMatrix::from_rows({{5, 1}, {-3, 2}}), 2};
  const auto c = feature_conditional(s, 2);
  const DenseMatrix zero(1, 2, 0.0);
  CHECK(max_abs(conditional_features(c, fi.F, zero)) == 0.0);

  // scalar conditioning
  const DenseMatrix s2 = DenseMatrix::from_rows({{2.0, 0.6}, {0.6, 1.5}});
  const auto c2 = feature_conditional(s2, 1);
  const DenseMatrix f1 = DenseMatrix::from_rows({{1.2}});
  CHECK(conditional_features(c2, f1, DenseMatrix(1, 1, 0.0))(0, 0) == doctest::Approx(0.6 / 2.0 * 1.2));
  CHECK(c2.chol_cond(0, 0) * c2.chol_cond(0, 0) == doctest::Approx(1.5 - 0.36 / 2.0));

  // joint draws reproduce S
  const auto spd = testgen::spd(rng, 4);
  const DenseMatrix& sm = spd.matrix();
  const auto lc = linalg::cholesky(SymmetricPsd<double>(sm.block(0, 0, 2, 2)));
  const int n = 10000;
  DenseMatrix sum(4, 4, 0.0);
  DenseMatrix sum2(4, 4, 0.0);
  for (int k = 0; k < n; ++k) {
    const DenseMatrix fi2 = lc.matrix() * testgen::gaussian(rng, 2, 1);
    const auto fb = conditional_feature_sample(spd, FeatureBlock<double>{fi2, 2}, rng);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) {
        const double v = fb.F(i, 0) * fb.F(j, 0);
        sum(i, j) += v;
        sum2(i, j) += v * v;
      }
  }
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      const double mean = sum(i, j) / n;
      const double se_ = std::sqrt((sum2(i, j) / n - mean * mean) / n);
      CHECK(std::abs(mean - sm(i, j)) < 5.0 * se_);
    }

  const auto blk = assemble_block_gram(fi.F, DenseMatrix::from_rows({{1, 1}}));
  CHECK(blk(2, 0) == 6.0);
  CHECK(blk(0, 0) == 26.0);
}

TEST_CASE("gp output loglik") {
  const DenseMatrix y = DenseMatrix::from_rows({{0.5}, {-1.0}});
  const double base = -0.5 * std::log(2.0 * M_PI * 0.3);
  CHECK(gp_output_loglik(y, y, 0.3) == doctest::Approx(2.0 * base));
  const DenseMatrix f = DenseMatrix::from_rows({{1.5}});
  CHECK(gp_output_loglik(f, DenseMatrix::from_rows({{0.5}}), 1.0) == doctest::Approx(-1.4189385332));
  CHECK(gp_output_loglik(y, y, 0.6) - gp_output_loglik(y, y, 0.3) ==
        doctest::Approx(-std::log(2.0)));
  CHECK_THROWS_AS(gp_output_loglik(f, y, 1.0), ShapeMismatch);
}
