#pragma once

// Seeded generators for property tests.

#include <cmath>
#include <cstddef>

#include "dwpkit/distributions.hpp"
#include "dwpkit/matrix.hpp"
#include "dwpkit/random.hpp"

namespace testgen {

using dwpkit::DenseMatrix;
using dwpkit::RandomStream;

inline DenseMatrix gaussian(RandomStream& rng, std::size_t r, std::size_t c) {
  DenseMatrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

// Lower triangular with diagonal in [0.5, 2].
inline dwpkit::linalg::LowerTriangular<double> lower(RandomStream& rng, std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = 0.5 + 1.5 * rng.uniform();
    for (std::size_t j = 0; j < i; ++j) m(i, j) = 0.5 * rng.normal();
  }
  return dwpkit::linalg::LowerTriangular<double>(m);
}

// Well conditioned invertible matrix: identity plus a modest perturbation.
inline DenseMatrix invertible(RandomStream& rng, std::size_t n) {
  DenseMatrix m = gaussian(rng, n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = (i == j ? 1.5 : 0.0) + 0.4 * m(i, j);
  return m;
}

inline dwpkit::linalg::SymmetricPsd<double> spd(RandomStream& rng, std::size_t n) {
  const auto l = lower(rng, n);
  return dwpkit::linalg::SymmetricPsd<double>(dwpkit::outer_gram(l.matrix()));
}

inline dwpkit::dist::GeneralizedBartlettParams<double> bartlett(RandomStream& rng, std::size_t p,
                                                                 std::size_t nu) {
  auto b = dwpkit::dist::bartlett_prior_params(p, nu);
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

inline dwpkit::dist::ABGWParams<double> abgw(RandomStream& rng, std::size_t p, std::size_t nu) {
  auto b = bartlett(rng, p, nu);
  return {invertible(rng, p), lower(rng, b.nu_tilde()), nu, b};
}

}  // namespace testgen
