#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dwpkit/linalg.hpp"
#include "helpers.hpp"

using namespace dwpkit;
using namespace dwpkit::linalg;

TEST_CASE("cholesky examples") {
  CHECK(max_abs_diff(cholesky(SymmetricPsd<double>(DenseMatrix::identity(3))).matrix(),
                     DenseMatrix::identity(3)) == 0.0);
  const auto l = cholesky(SymmetricPsd<double>(DenseMatrix::from_rows({{4, 2}, {2, 2}})));
  CHECK(max_abs_diff(l.matrix(), DenseMatrix::from_rows({{2, 0}, {1, 1}})) < 1e-15);

  const DenseMatrix ones = DenseMatrix::from_rows({{1, 1}, {1, 1}});
  const auto c = cholesky_jittered(SymmetricPsd<double>(ones));
  CHECK(c.jitter > 0.0);
  CHECK(c.jitter == doctest::Approx(1e-10));
  const DenseMatrix recon = outer_gram(c.factor.matrix());
  CHECK(max_abs_diff(recon, ones + c.jitter * DenseMatrix::identity(2)) < 1e-12);
}

TEST_CASE("cholesky rejects indefinite matrices") {
  const SymmetricPsd<double> m(DenseMatrix::from_rows({{1, 2}, {2, 1}}));
  CHECK_THROWS_AS(cholesky(m), FactorizationFailure);
}

TEST_CASE("cholesky reconstruction property") {
  RandomStream rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + trial % 8;
    const auto m = testgen::spd(rng, n);
    const auto c = cholesky_jittered(m);
    const DenseMatrix target = m.matrix() + c.jitter * DenseMatrix::identity(n);
    CHECK(max_abs_diff(outer_gram(c.factor.matrix()), target) <= 1e-8 * max_abs(m.matrix()));
    for (std::size_t i = 0; i < n; ++i) CHECK(c.factor(i, i) > 0.0);
  }
}

TEST_CASE("rank_cholesky examples") {
  const DenseMatrix t = DenseMatrix::from_rows({{1}, {2}});
  const auto l = rank_cholesky(SymmetricPsd<double>(outer_gram(t)), 1);
  CHECK(max_abs_diff(l, t) < 1e-15);
  CHECK(max_abs_diff(rank_cholesky(SymmetricPsd<double>(DenseMatrix::identity(2)), 2),
                     DenseMatrix::identity(2)) == 0.0);

  RandomStream rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    DenseMatrix lam = testgen::gaussian(rng, 4, 2);
    lam(0, 1) = 0.0;
    lam(0, 0) = std::abs(lam(0, 0)) + 0.5;
    lam(1, 1) = std::abs(lam(1, 1)) + 0.5;
    const auto back = rank_cholesky(SymmetricPsd<double>(outer_gram(lam)), 2);
    CHECK(max_abs_diff(back, lam) < 1e-10);
  }
  CHECK_THROWS_AS(rank_cholesky(SymmetricPsd<double>(DenseMatrix(2, 2, 0.0)), 1), RankDeficiency);
}

TEST_CASE("tri_solve examples and residual property") {
  const LowerTriangular<double> l(DenseMatrix::from_rows({{2, 0}, {1, 1}}));
  const DenseMatrix x = tri_solve(l, DenseMatrix::from_rows({{2}, {2}}));
  CHECK(x(0, 0) == doctest::Approx(1.0));
  CHECK(x(1, 0) == doctest::Approx(1.0));
  const DenseMatrix rhs = DenseMatrix::from_rows({{3, -1}, {0.5, 7}});
  CHECK(max_abs_diff(tri_solve(LowerTriangular<double>::identity(2), rhs), rhs) == 0.0);
  const LowerTriangular<double> d(DenseMatrix::from_rows({{2, 0}, {0, 4}}));
  CHECK(max_abs_diff(tri_solve(d, DenseMatrix::identity(2)),
                     DenseMatrix::from_rows({{0.5, 0}, {0, 0.25}})) == 0.0);
  CHECK_THROWS_AS(tri_solve(LowerTriangular<double>(DenseMatrix(2, 2, 0.0)), rhs), Singular);

  RandomStream rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + trial % 7;
    const auto lo = testgen::lower(rng, n);
    const DenseMatrix b = testgen::gaussian(rng, n, 3);
    const DenseMatrix x1 = tri_solve(lo, b);
    CHECK(max_abs_diff(lo.matrix() * x1, b) <= 1e-10 * max_abs(b));
    const DenseMatrix x2 = tri_solve(lo, b, true);
    CHECK(max_abs_diff(transpose(lo.matrix()) * x2, b) <= 1e-10 * max_abs(b));
  }
}

TEST_CASE("log_det_triangular") {
  CHECK(log_det_triangular(LowerTriangular<double>::identity(3)) == 0.0);
  CHECK(log_det_triangular(LowerTriangular<double>(DenseMatrix::from_rows({{2, 0}, {0, 2}}))) ==
        doctest::Approx(std::log(4.0)));
  const double e = std::numbers::e;
  const LowerTriangular<double> m(
      DenseMatrix::from_rows({{e, 0, 0}, {1, e * e, 0}, {-3, 2, e * e * e}}));
  CHECK(log_det_triangular(m) == doctest::Approx(6.0).epsilon(1e-14));
  CHECK_THROWS_AS(log_det_triangular(LowerTriangular<double>(DenseMatrix::from_rows({{-1}}))),
                  NonPositiveDiagonal);

  // against the LU determinant of the full matrix
  RandomStream rng(8);
  for (std::size_t n = 1; n <= 8; ++n) {
    const auto lo = testgen::lower(rng, n);
    const double a = log_det_triangular(lo);
    const double b = log_abs_det(lo.matrix());
    CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(a)));
  }
}

TEST_CASE("log_multivariate_gamma") {
  CHECK(log_multivariate_gamma(1, 0.5) == doctest::Approx(0.5 * std::log(std::numbers::pi)));
  CHECK(log_multivariate_gamma(2, 1.0) == doctest::Approx(std::log(std::numbers::pi)));
  CHECK(log_multivariate_gamma(1, 1.0) == doctest::Approx(0.0));
  for (double a : {0.5, 1.0, 2.5, 10.0})
    CHECK(std::abs(log_multivariate_gamma(1, a) - std::lgamma(a)) <= 1e-12);
  CHECK_THROWS_AS(log_multivariate_gamma(3, 1.0), DomainError);
}

TEST_CASE("lu solve and determinant") {
  const DenseMatrix a = DenseMatrix::from_rows({{0, 2}, {3, 1}});
  CHECK(log_abs_det(a) == doctest::Approx(std::log(6.0)));
  CHECK(lu_decompose(a).sign == -1);
  const DenseMatrix x = lu_solve(lu_decompose(a), DenseMatrix::from_rows({{2}, {4}}));
  CHECK(x(0, 0) == doctest::Approx(1.0));
  CHECK(x(1, 0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(lu_decompose(DenseMatrix(2, 2, 1.0)), Singular);
}

TEST_CASE("structured types validate") {
  CHECK_THROWS_AS(LowerTriangular<double>(DenseMatrix::from_rows({{1, 1}, {0, 1}})), DomainError);
  CHECK_THROWS_AS(SymmetricPsd<double>(DenseMatrix::from_rows({{1, 1}, {0, 1}})), DomainError);
  CHECK_THROWS_AS(SymmetricPsd<double>(DenseMatrix(2, 3)), ShapeMismatch);
}
