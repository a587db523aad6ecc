#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dwpkit/commands.hpp"
#include "dwpkit/dataset.hpp"
#include "dwpkit/stats.hpp"

using namespace dwpkit;
using dwpkit::cli::CommandArgs;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string log;
};

Run run(const std::string& name, const std::string& config, std::optional<std::string> out = {},
        std::optional<std::uint64_t> seed = {}) {
  CommandArgs a;
  if (!config.empty()) a.config_text = config;
  a.out = std::move(out);
  a.seed = seed;
  std::ostringstream o, l;
  Run r;
  r.code = cli::run_command(name, a, o, l);
  r.out = o.str();
  r.log = l.str();
  return r;
}

std::string tmp(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("dwpkit_cmd_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream b;
  b << in.rdbuf();
  return b.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<double> column(const std::string& csv, std::size_t col) {
  std::vector<double> out;
  const auto ls = lines(csv);
  for (std::size_t i = 1; i < ls.size(); ++i) {
    std::istringstream in(ls[i]);
    std::string f;
    for (std::size_t c = 0; c <= col; ++c) std::getline(in, f, ',');
    out.push_back(std::stod(f));
  }
  return out;
}

const char* kAbgw =
    R"({"schema": 1, "family": "abgw", "nu": 2, "seed": 3,
        "A": [[1, 0.2, 0], [0.1, 1.2, 0], [0, 0.3, 0.9]], "B": [[1, 0], [0.5, 1.5]])";

}  // namespace

TEST_CASE("sample") {
  const Run empty = run("sample", std::string(kAbgw) + R"(, "n": 0})");
  CHECK(empty.code == 0);
  CHECK(empty.out == "g_0_0,g_1_0,g_1_1,g_2_0,g_2_1,g_2_2,log_q\n");

  const Run a = run("sample", std::string(kAbgw) + R"(, "n": 20})");
  const Run b = run("sample", std::string(kAbgw) + R"(, "n": 20})");
  CHECK(a.code == 0);
  CHECK(lines(a.out).size() == 21);
  CHECK(a.out == b.out);
  CHECK(run("sample", std::string(kAbgw) + R"(, "n": 20})", {}, 4).out != a.out);

  // P = 1 standard Wishart with nu = 1 is chi-squared with one degree of freedom
  const Run w = run("sample", R"({"schema": 1, "family": "wishart", "P": 1, "nu": 1, "n": 10000})");
  const auto g = column(w.out, 0);
  REQUIRE(g.size() == 10000);
  const boost::math::chi_squared chi1(1.0);
  const auto ks = stats::ks_statistic(g, [&](double x) { return boost::math::cdf(chi1, x); });
  CHECK(ks.passed);
  const auto logq = column(w.out, 1);
  for (std::size_t i = 0; i < 20; ++i)
    CHECK(logq[i] == doctest::Approx(std::log(boost::math::pdf(chi1, g[i]))).epsilon(1e-10));
}

TEST_CASE("logpdf reproduces sampled densities") {
  for (const std::string fam : {"gw", "agw", "abgw", "wishart"}) {
    CAPTURE(fam);
    std::string cfg;
    if (fam == "abgw") cfg = kAbgw;
    else if (fam == "agw") cfg = R"({"schema": 1, "family": "agw", "nu": 2, "A": [[1, 0.2, 0], [0.1, 1.2, 0], [0, 0.3, 0.9]])";
    else cfg = R"({"schema": 1, "family": ")" + fam + R"(", "nu": 4, "scale": [[2, 0.5, 0], [0.5, 1, 0.2], [0, 0.2, 1.5]])";
    const std::string path = tmp("g_" + fam + ".csv");
    REQUIRE(run("sample", cfg + R"(, "n": 30})", path).code == 0);
    const Run l = run("logpdf", cfg + R"(, "input": ")" + path + "\"}");
    REQUIRE(l.code == 0);
    const auto expected = column(slurp(path), 6);
    const auto got = column(l.out, 0);
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-8));
  }
}

TEST_CASE("config errors carry field paths") {
  const Run bad = run("sample", std::string(kAbgw) + R"(, "n": 1, "bartlett": {"alpha": [1, 1], "beta": [1, "x"], "mu": [[0, 0]], "sigma": [[1, 1]]}})");
  CHECK(bad.code == 2);
  CHECK(bad.log.find("bartlett.beta[1]") != std::string::npos);
  const Run unknown = run("jac-check", R"({"schema": 1, "trails": 3})");
  CHECK(unknown.code == 2);
  CHECK(unknown.log.find("trails: unknown field") != std::string::npos);
  CHECK(run("jac-check", R"({"schema": 2})").code == 2);
  CHECK(run("train", "").code == 2);
  CHECK(run("frobnicate", "").code == 2);
}

TEST_CASE("jac-check and reduction-check exit codes") {
  const Run empty = run("jac-check", R"({"schema": 1, "trials": 0})");
  CHECK(empty.code == 0);
  CHECK(empty.out.empty());
  const Run zero = run("jac-check", R"({"schema": 1, "max_p": 3, "trials": 3, "tolerance": 0})");
  CHECK(zero.code == 1);
  CHECK(zero.out.find("PASS") == std::string::npos);
  const Run ok = run("jac-check", R"({"schema": 1, "max_p": 3, "trials": 5})");
  CHECK(ok.code == 0);
  CHECK(ok.out.find("FAIL") == std::string::npos);
  CHECK(run("reduction-check", R"({"schema": 1, "trials": 20})").code == 0);
}

TEST_CASE("probplot") {
  const Run a = run("probplot", R"({"schema": 1, "mu": 3, "sigma2": 1, "n": 10000})");
  const Run b = run("probplot", R"({"schema": 1, "mu": 3, "sigma2": 1, "n": 10000})");
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(lines(a.out).size() == 10001);
  CHECK(a.log.find("FAIL ks_vs_fitted_gamma") != std::string::npos);
  CHECK(a.log.find("PASS ks_vs_noncentral_chi2") != std::string::npos);
  CHECK(run("probplot", R"({"schema": 1, "n": 50})").code == 2);
  CHECK(run("probplot", R"({"schema": 1, "sigma2": 0})").code == 2);
}

TEST_CASE("train, elbo and predict") {
  const std::string data =
      R"("data": {"synthetic": {"n": 62, "seed": 5}, "split": {"test_fraction": 0.2, "seed": 1}})";
  const std::string model = R"("model": {"depth": 2, "widths": [2, 2], "inducing_count": 6})";
  const std::string ckpt = tmp("toy.json");
  const Run t = run("train", "{\"schema\": 1, \"family\": \"abgw\", " + data + ", " + model +
                                 R"(, "train": {"steps": 2000, "n_samples": 1}})",
                    ckpt);
  REQUIRE(t.code == 0);
  const std::string metrics = slurp(tmp("toy.metrics.csv"));
  CHECK(lines(metrics).front() ==
        "step,elbo_total,layer1,layer2,final_term,expected_loglik,anneal,learning_rate");
  const auto total = column(metrics, 1);
  REQUIRE(total.size() == 2000);
  CHECK(total.back() > total.front());
  const auto anneal = column(metrics, 6);
  CHECK(anneal.front() == 0.0);
  CHECK(anneal.back() == 1.0);

  SUBCASE("byte-identical rerun") {
    const std::string again = tmp("toy2.json");
    REQUIRE(run("train", "{\"schema\": 1, \"family\": \"abgw\", " + data + ", " + model +
                             R"(, "train": {"steps": 50, "n_samples": 1}})",
                again)
                .code == 0);
    const std::string first = slurp(again);
    REQUIRE(run("train", "{\"schema\": 1, \"family\": \"abgw\", " + data + ", " + model +
                             R"(, "train": {"steps": 50, "n_samples": 1}})",
                again)
                .code == 0);
    CHECK(slurp(again) == first);
  }

  SUBCASE("predict in original units") {
    const Run p = run("predict", R"({"schema": 1, "checkpoint": ")" + ckpt + "\", " + data +
                                     R"(, "n_samples": 40})");
    REQUIRE(p.code == 0);
    const auto mean = column(p.out, 1);
    const auto target = column(p.out, 3);
    const auto ll = column(p.out, 4);
    REQUIRE(mean.size() == 12);
    data::SplitSpec split;
    split.test_fraction = 0.2;
    split.seed = 1;
    const auto ds = data::synthetic_regression(62, 5, 0.1, split);
    double se = 0.0, lls = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
      CHECK(target[i] == ds.raw(ds.test_rows[i], 1));
      se += (mean[i] - target[i]) * (mean[i] - target[i]);
      lls += ll[i];
    }
    const double rmse = std::sqrt(se / 12.0);
    const auto pos = p.log.find("rmse=");
    REQUIRE(pos != std::string::npos);
    CHECK(std::stod(p.log.substr(pos + 5)) == doctest::Approx(rmse).epsilon(1e-12));
    const auto lpos = p.log.find("mean_log_lik=");
    CHECK(std::stod(p.log.substr(lpos + 13)) == doctest::Approx(lls / 12.0).epsilon(1e-12));
    CHECK(rmse < 0.5);  // target sd is about 0.8
  }

  SUBCASE("elbo of a prior-matched checkpoint") {
    const std::string prior = tmp("prior.json");
    REQUIRE(run("train", "{\"schema\": 1, \"family\": \"abgw\", \"init\": \"prior\", " + data + ", " +
                             model + R"(, "train": {"steps": 0}})",
                prior)
                .code == 0);
    const Run e = run("elbo", R"({"schema": 1, "checkpoint": ")" + prior + "\", " + data +
                                  R"(, "n_samples": 20})");
    REQUIRE(e.code == 0);
    for (const auto& l : lines(e.out)) {
      if (l.rfind("layer", 0) == 0 || l.rfind("final_term", 0) == 0) {
        CAPTURE(l);
        CHECK(std::abs(std::stod(l.substr(l.find(' ') + 1))) < 1e-8);
      }
    }
  }
}
