#pragma once

#include <cstdint>
#include <random>

namespace dwpkit {

// Seedable, splittable source of random variates. Every sampler in the
// library takes one of these explicitly; nothing draws from global state.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  // Independent child stream; advances this stream by two draws.
  RandomStream split();

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Gamma(shape, rate) by Marsaglia-Tsang, with the U^(1/shape) boost for
  // shape < 1.
  double gamma(double shape, double rate);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace dwpkit
