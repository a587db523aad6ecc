#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "dwpkit/checkpoint.hpp"
#include "dwpkit/dataset.hpp"
#include "dwpkit/errors.hpp"

using namespace dwpkit;
using namespace dwpkit::data;

namespace {

std::string temp_file(const std::string& name, const std::string& contents) {
  const auto p = std::filesystem::temp_directory_path() / ("dwpkit_test_" + name);
  std::ofstream(p, std::ios::binary) << contents;
  return p.string();
}

}  // namespace

TEST_CASE("z-score on an all-train column") {
  const auto path = temp_file("z.csv", "a,b\n1,10\n2,20\n3,40\n");
  const Dataset d = ingest_csv(path, ColumnRef{std::string("b")}, {});
  CHECK(d.columns == std::vector<std::string>{"a", "b"});
  REQUIRE(d.x.rows() == 3);
  CHECK(d.x(0, 0) == doctest::Approx(-1.2247448713915890));
  CHECK(d.x(1, 0) == doctest::Approx(0.0));
  CHECK(d.x(2, 0) == doctest::Approx(1.2247448713915890));
  CHECK(d.norm.x.stddev[0] == doctest::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(d.norm.y.mean[0] == doctest::Approx(70.0 / 3.0));
  CHECK(d.test_rows.empty());
}

TEST_CASE("header detection") {
  const Dataset with = ingest_csv(temp_file("h1.csv", "x,\"y, quoted\"\n1,2\n2,5\n4,1\n"),
                                  ColumnRef{-1L}, {});
  CHECK(with.raw.rows() == 3);
  CHECK(with.columns[1] == "y, quoted");
  const Dataset without = ingest_csv(temp_file("h2.csv", "1,2\r\n2,5\r\n4,1\r\n"), ColumnRef{1L}, {});
  CHECK(without.raw.rows() == 3);
  CHECK(without.columns == std::vector<std::string>{"c0", "c1"});
  CHECK(without.raw(2, 0) == 4.0);
}

TEST_CASE("ingest errors") {
  SUBCASE("constant column named") {
    try {
      ingest_csv(temp_file("c.csv", "u,v,w\n1,7,3\n2,7,1\n3,7,2\n"), ColumnRef{std::string("w")}, {});
      FAIL("expected ConstantColumn");
    } catch (const ConstantColumn& e) {
      CHECK(std::string(e.what()).find("'v'") != std::string::npos);
    }
  }
  SUBCASE("parse error position") {
    try {
      ingest_csv(temp_file("p.csv", "a,b\n1,2\n3,oops\n"), ColumnRef{-1L}, {});
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.row() == 3);
      CHECK(e.column() == 2);
    }
  }
  SUBCASE("missing value") {
    CHECK_THROWS_AS(ingest_csv(temp_file("m.csv", "1,2\n3,\n4,5\n"), ColumnRef{-1L}, {}), ParseError);
  }
  SUBCASE("ragged row") {
    CHECK_THROWS_AS(ingest_csv(temp_file("r.csv", "1,2\n3\n"), ColumnRef{-1L}, {}), ParseError);
  }
  SUBCASE("target out of range") {
    CHECK_THROWS_AS(ingest_csv(temp_file("t.csv", "1,2\n3,4\n"), ColumnRef{5L}, {}), ConfigError);
  }
}

TEST_CASE("split fits normalisation on training rows only") {
  SplitSpec s;
  s.train = std::vector<std::size_t>{0, 1, 2};
  const Dataset d = ingest_csv(temp_file("s.csv", "x,y\n1,1\n2,2\n3,4\n100,8\n"), ColumnRef{-1L}, s);
  CHECK(d.test_rows == std::vector<std::size_t>{3});
  CHECK(d.norm.x.mean[0] == doctest::Approx(2.0));
  CHECK(d.x(3, 0) == doctest::Approx(98.0 / std::sqrt(2.0 / 3.0)));

  SplitSpec f;
  f.test_fraction = 0.25;
  f.seed = 9;
  const Dataset a = synthetic_regression(40, 1, 0.1, f);
  const Dataset b = synthetic_regression(40, 1, 0.1, f);
  CHECK(a.test_rows.size() == 10);
  CHECK(a.train_rows.size() == 30);
  CHECK(a.test_rows == b.test_rows);
  const auto td = a.train_data();
  double mean = 0.0;
  for (double v : td.y.storage()) mean += v;
  CHECK(std::abs(mean / 30.0) < 1e-12);
}

TEST_CASE("write and re-ingest reproduce normalised matrices") {
  SplitSpec f;
  f.test_fraction = 0.3;
  f.seed = 2;
  const Dataset a = synthetic_regression(50, 7, 0.2, f);
  const auto path = std::filesystem::temp_directory_path() / "dwpkit_test_rt.csv";
  write_csv(a, path.string());
  const Dataset b = ingest_csv(path.string(), ColumnRef{std::string("y")}, f);
  CHECK(max_abs_diff(a.x, b.x) == 0.0);
  CHECK(max_abs_diff(a.y, b.y) == 0.0);
  CHECK(a.train_rows == b.train_rows);
}

TEST_CASE("checkpoint round trip") {
  const Dataset ds = synthetic_regression(30, 4, 0.1, {});
  model::DWPConfig cfg;
  cfg.widths = {2, 3};
  cfg.inducing_count = 5;
  RandomStream rng(5);
  io::Checkpoint c{vi::Family::AGW, 17, cfg, vi::init_params(cfg, ds.x, rng), ds.norm};
  vi::match_conditional_prior(c.params, cfg);  // raw q = -inf must survive
  const io::Checkpoint back = io::from_json(io::to_json(c));
  CHECK(back.family == vi::Family::AGW);
  CHECK(back.seed == 17);
  CHECK(back.config.widths == cfg.widths);
  REQUIRE(back.params.theta.size() == c.params.theta.size());
  for (std::size_t k = 0; k < c.params.theta.size(); ++k)
    CHECK(back.params.theta[k] == c.params.theta[k]);
  CHECK(back.norm.y.stddev == ds.norm.y.stddev);
  CHECK(io::to_json(back) == io::to_json(c));

  std::string wrong = io::to_json(c);
  wrong.replace(wrong.find("\"schema\": 1"), 11, "\"schema\": 2");
  CHECK_THROWS_AS(io::from_json(wrong), ConfigError);
}
