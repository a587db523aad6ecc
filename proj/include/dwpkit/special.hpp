#pragma once

#include <array>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>

#include "dwpkit/scalar.hpp"

namespace dwpkit {

inline constexpr double kLogTwoPi = 1.8378770664093454836;

// log Gamma(x; shape, rate) = shape log rate + (shape - 1) log x - rate x - lgamma(shape)
template <Scalar T>
T log_gamma_density(const T& x, const T& shape, const T& rate) {
  return shape * log(rate) + (shape - 1.0) * log(x) - rate * x - lgamma(shape);
}

template <Scalar T>
T log_normal_density(const T& x, const T& mean, const T& stddev) {
  const T z = (x - mean) / stddev;
  return -0.5 * kLogTwoPi - log(stddev) - 0.5 * z * z;
}

// Quantile of Gamma(shape, rate) at probability u. For ad::Var inputs the
// derivative in `shape` is the implicit one, -dP/dshape / density, with the
// shape-derivative of the regularised incomplete gamma taken by a central
// difference.
template <Scalar T>
T gamma_quantile(double u, const T& shape, const T& rate) {
  const double a = value(shape);
  const double q = boost::math::gamma_p_inv(a, u);
  if constexpr (std::same_as<T, double>) {
    return q / rate;
  } else {
    const double b = value(rate);
    double dq_da = 0.0;
    if (!shape.is_constant()) {
      const double h = 1e-6 * std::max(1.0, a);
      const double dp_da =
          (boost::math::gamma_p(a + h, q) - boost::math::gamma_p(a - h, q)) / (2.0 * h);
      const double density = boost::math::gamma_p_derivative(a, q);
      dq_da = -dp_da / density;
    }
    const std::array<Var, 2> inputs{shape, rate};
    const std::array<double, 2> partials{dq_da / b, -q / (b * b)};
    return ad::custom(q / b, inputs, partials);
  }
}

}  // namespace dwpkit
