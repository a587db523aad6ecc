#include "dwpkit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "dwpkit/errors.hpp"

namespace dwpkit::stats {

StatReport ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf,
                        std::string name, double level) {
  if (samples.empty()) throw DomainError("ks_statistic: no samples");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("ks_statistic: level must be in (0, 1)");
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  const double coef = level == 0.01 ? kKsCoefficient1Percent : std::sqrt(-0.5 * std::log(level / 2.0));
  const double crit = coef / std::sqrt(n);
  return {std::move(name), d, crit, d <= crit};
}

GammaFit gamma_mle_fit(std::span<const double> samples) {
  if (samples.empty()) throw DomainError("gamma_mle_fit: no samples");
  double sum = 0.0;
  double sum_log = 0.0;
  for (double v : samples) {
    if (!(v > 0.0)) throw DomainError("gamma_mle_fit: samples must be positive");
    sum += v;
    sum_log += std::log(v);
  }
  const double n = static_cast<double>(samples.size());
  const double mean = sum / n;
  const double s = std::log(mean) - sum_log / n;
  if (!(s > 0.0)) throw NonConvergence("gamma_mle_fit: samples are constant");

  double a = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
  for (int it = 0; it < 100; ++it) {
    const double f = std::log(a) - boost::math::digamma(a) - s;
    const double df = 1.0 / a - boost::math::trigamma(a);
    double next = a - f / df;
    if (!(next > 0.0)) next = a / 2.0;
    if (std::abs(next - a) <= 1e-12 * a) return {next, next / mean};
    a = next;
  }
  throw NonConvergence("gamma_mle_fit: Newton iteration did not converge in 100 steps");
}

double noncentral_chi2_cdf(double x, double k, double lambda) {
  if (!(k > 0.0) || !(lambda >= 0.0)) throw DomainError("noncentral_chi2_cdf: need k > 0, lambda >= 0");
  if (x <= 0.0) return 0.0;
  if (lambda == 0.0) return boost::math::gamma_p(k / 2.0, x / 2.0);

  // Poisson(lambda/2) mixture of central chi-squared CDFs, summed outward
  // from the mode of the weights.
  const double h = lambda / 2.0;
  const auto log_weight = [h](double j) { return -h + j * std::log(h) - std::lgamma(j + 1.0); };
  const double mode = std::floor(h);
  constexpr double kTol = 1e-12;

  double total = 0.0;
  double weight_sum = 0.0;
  for (double j = mode;; j += 1.0) {
    const double w = std::exp(log_weight(j));
    const double term = w * boost::math::gamma_p(k / 2.0 + j, x / 2.0);
    total += term;
    weight_sum += w;
    if (w < kTol * std::max(weight_sum, 1e-300) && j > h) break;
  }
  for (double j = mode - 1.0; j >= 0.0; j -= 1.0) {
    const double w = std::exp(log_weight(j));
    total += w * boost::math::gamma_p(k / 2.0 + j, x / 2.0);
    weight_sum += w;
    if (w < kTol * weight_sum) break;
  }
  return std::clamp(total, 0.0, 1.0);
}

}  // namespace dwpkit::stats
