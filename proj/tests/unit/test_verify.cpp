#include <doctest.h>

#include "dwpkit/verify.hpp"

using namespace dwpkit;
using namespace dwpkit::verify;

TEST_CASE("jac_check") {
  const auto reports = jac_check({});
  CHECK(reports.size() == 15 * 5 + 5);  // plus chol_square on square shapes
  for (const auto& r : reports) {
    INFO(r.name << " " << r.statistic);
    CHECK(r.passed);
  }

  JacCheckOptions zero;
  zero.max_p = 3;
  zero.trials = 3;
  zero.tolerance = 0.0;
  for (const auto& r : jac_check(zero)) CHECK_FALSE(r.passed);

  JacCheckOptions none;
  none.trials = 0;
  CHECK(jac_check(none).empty());
}

TEST_CASE("chain, reduction and round trip") {
  for (const auto& r : chain_check(5, 100, 3)) {
    INFO(r.name << " " << r.statistic);
    CHECK(r.passed);
  }
  for (const auto& r : reduction_check({})) {
    INFO(r.name << " " << r.statistic);
    CHECK(r.passed);
  }
  const auto rt = round_trip_check(8, 100, 4);
  INFO(rt.statistic);
  CHECK(rt.passed);
}

TEST_CASE("moment check") {
  CHECK(moment_check(2, 3, 20000, 1).passed);
  CHECK(moment_check(1, 1, 20000, 2).passed);
}

TEST_CASE("probplot") {
  const auto r = probplot(3.0, 1.0, 10000, 11);
  CHECK(r.samples.size() == 10000);
  CHECK(r.quantiles.size() == 10000);
  CHECK(std::is_sorted(r.samples.begin(), r.samples.end()));
  CHECK_FALSE(r.gamma_ks.passed);
  CHECK(r.noncentral_ks.passed);
  // X ~ N(3, 2): E[X^2] = 11
  double mean = 0.0;
  for (double x : r.samples) mean += x / 10000.0;
  CHECK(mean == doctest::Approx(11.0).epsilon(0.05));

  const auto again = probplot(3.0, 1.0, 10000, 11);
  CHECK(again.samples == r.samples);
  CHECK(again.gamma_ks.statistic == r.gamma_ks.statistic);

  CHECK_THROWS_AS(probplot(3.0, 1.0, 50, 1), DomainError);
  CHECK_THROWS_AS(probplot(0.0, 0.0, 500, 1), DomainError);
}
