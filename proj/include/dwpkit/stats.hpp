#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

namespace dwpkit::stats {

// Asymptotic one-sample KS critical coefficient at the 1% level.
inline constexpr double kKsCoefficient1Percent = 1.628;

struct StatReport {
  std::string name;
  double statistic = 0.0;
  double critical = 0.0;
  bool passed = false;  // statistic <= critical
};

// One-sample Kolmogorov-Smirnov test against `cdf`, critical value c(level)/sqrt(n).
StatReport ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf,
                        std::string name = "ks", double level = 0.01);

struct GammaFit {
  double shape = 0.0;
  double rate = 0.0;
};

// Maximum likelihood Gamma(shape, rate); Newton on log a - digamma(a) = log mean - mean log.
GammaFit gamma_mle_fit(std::span<const double> samples);

// CDF of the noncentral chi-squared with k degrees of freedom and noncentrality lambda.
double noncentral_chi2_cdf(double x, double k, double lambda);

}  // namespace dwpkit::stats
