#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>

#include "dwpkit/autodiff.hpp"

namespace dwpkit {

using ad::Var;

template <class T>
concept Scalar = std::same_as<T, double> || std::same_as<T, Var>;

using std::abs;
using std::exp;
using std::isfinite;
using std::lgamma;
using std::log;
using std::log1p;
using std::pow;
using std::sqrt;
using ad::abs;
using ad::exp;
using ad::isfinite;
using ad::lgamma;
using ad::log;
using ad::log1p;
using ad::pow;
using ad::sqrt;
using ad::value;

inline double value(double x) { return x; }

inline double dot_accumulate(double init, const double* a, std::size_t sa, const double* b,
                             std::size_t sb, std::size_t n, double sign) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += a[k * sa] * b[k * sb];
  return init + sign * s;
}
using ad::dot_accumulate;

inline double weighted_sum(std::span<const double> xs, std::span<const double> weights) {
  double s = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) s += weights[k] * xs[k];
  return s;
}
using ad::weighted_sum;

// log(1 + e^x) without overflow.
template <Scalar T>
T softplus(const T& x) {
  if (value(x) > 0.0) return x + log1p(exp(-x));
  return log1p(exp(x));
}

// Inverse of softplus for y > 0.
inline double softplus_inverse(double y) {
  return y > 30.0 ? y + std::log(-std::expm1(-y)) : std::log(std::expm1(y));
}

template <Scalar T>
T sigmoid(const T& x) {
  if (value(x) >= 0.0) return 1.0 / (1.0 + exp(-x));
  const T e = exp(x);
  return e / (1.0 + e);
}

}  // namespace dwpkit
