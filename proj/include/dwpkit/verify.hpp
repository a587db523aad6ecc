#pragma once

// Verification suites behind the command-line checks and the acceptance
// binary. Each check returns StatReports; a report passes when its
// statistic is within the critical value.

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "dwpkit/distributions.hpp"
#include "dwpkit/stats.hpp"

namespace dwpkit::verify {

using stats::StatReport;

// Random instances used by the suites.
linalg::LowerTriangular<double> random_lower(RandomStream& rng, std::size_t n);
DenseMatrix random_invertible(RandomStream& rng, std::size_t n);
dist::GeneralizedBartlettParams<double> random_bartlett(RandomStream& rng, std::size_t p,
                                                        std::size_t nu);
dist::ABGWParams<double> random_abgw(RandomStream& rng, std::size_t p, std::size_t nu);

struct JacCheckOptions {
  std::size_t max_p = 5;
  std::size_t max_nu = 5;
  std::size_t trials = 25;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
};

// Analytic log-Jacobians against finite differences, one report per
// identity and shape (statistic: max relative error |a - b| / max(1, |b|)),
// plus the density chain identity per shape (statistic: max abs error,
// critical min(1e-8, tolerance)). Reports pass iff statistic < critical.
std::vector<StatReport> jac_check(const JacCheckOptions& opts);

// log q(G) against log p(T) minus the log-Jacobians, over `trials` random
// (params, T) pairs with P <= max_p: one report with general B and one with B = I.
std::vector<StatReport> chain_check(std::size_t max_p, std::size_t trials, std::uint64_t seed,
                                    double tolerance = 1e-8);

struct ReductionOptions {
  std::size_t max_p = 6;
  std::size_t trials = 100;
  double nesting_tolerance = 1e-10;
  double wishart_tolerance = 1e-8;
  std::uint64_t seed = 0;
};

// AB-GW(B = I) = A-GW, A-GW(lower A) = GW, GW(prior) = Wishart; max abs error each.
std::vector<StatReport> reduction_check(const ReductionOptions& opts);

// recover_T(assemble_gram(T)) against T, max relative error over trials, P <= max_p.
StatReport round_trip_check(std::size_t max_p, std::size_t trials, std::uint64_t seed,
                            double tolerance = 1e-8);

// Monte Carlo mean of standard-construction Wishart draws within `max_z`
// standard errors of nu Sigma, for a fixed non-diagonal Sigma.
StatReport moment_check(std::size_t p, std::size_t nu, std::size_t n, std::uint64_t seed,
                        double max_z = 5.0);

struct ProbplotResult {
  std::vector<double> samples;                         // sorted
  std::vector<std::pair<double, double>> quantiles;    // (fitted Gamma, empirical)
  stats::GammaFit fit;
  StatReport gamma_ks;       // expected to fail for mu != 0
  StatReport noncentral_ks;  // expected to pass
};

// Top-left entry of A T T^T A^T with A = [[1, 1], [0, 1]] and T = (g, n)^T,
// g ~ N(0, 1), n ~ N(mu, sigma2); its law is (sigma2 + 1) chi'^2_1(mu^2 / (sigma2 + 1)).
ProbplotResult probplot(double mu, double sigma2, std::size_t n, std::uint64_t seed);

}  // namespace dwpkit::verify
