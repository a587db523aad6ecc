#pragma once

// Typed access to JSON config documents. Errors carry the dotted field path.

#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "dwpkit/errors.hpp"
#include "dwpkit/matrix.hpp"
#include "dwpkit/model.hpp"
#include "json.hpp"

namespace dwpkit::jsonio {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& node, std::string path) : node_(&node), path_(std::move(path)) {
    if (!node_->is_object()) fail("expected an object");
  }

  const std::string& path() const { return path_; }
  bool has(const std::string& key) const { return node_->contains(key); }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError((path_.empty() ? std::string("config") : path_) + ": " + msg);
  }
  [[noreturn]] void fail_at(const std::string& key, const std::string& msg) const {
    throw ConfigError(field(key) + ": " + msg);
  }

  const json& raw(const std::string& key) const {
    if (!has(key)) fail_at(key, "missing required field");
    return (*node_)[key];
  }

  Reader object(const std::string& key) const { return Reader(raw(key), field(key)); }

  double number(const std::string& key) const {
    const json& v = raw(key);
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (s == "inf") return std::numeric_limits<double>::infinity();
      if (s == "-inf") return -std::numeric_limits<double>::infinity();
      if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    fail_at(key, "expected a number");
  }
  double number(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  std::uint64_t count(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number_unsigned()) {
      fail_at(key, "expected a nonnegative integer");
    }
    return v.get<std::uint64_t>();
  }
  std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? count(key) : fallback;
  }

  std::string string(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_string()) fail_at(key, "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) fail_at(key, "expected true or false");
    return v.get<bool>();
  }

  std::vector<double> numbers(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_array()) fail_at(key, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(element(v[i], field(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  std::vector<std::size_t> counts(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_array()) fail_at(key, "expected an array of nonnegative integers");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_unsigned()) {
        throw ConfigError(field(key) + "[" + std::to_string(i) + "]: expected a nonnegative integer");
      }
      out.push_back(v[i].get<std::size_t>());
    }
    return out;
  }

  // Rows of equal length.
  DenseMatrix matrix(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_array() || v.empty()) fail_at(key, "expected a nonempty array of rows");
    const std::size_t rows = v.size();
    std::size_t cols = 0;
    DenseMatrix m;
    for (std::size_t i = 0; i < rows; ++i) {
      const std::string at = field(key) + "[" + std::to_string(i) + "]";
      if (!v[i].is_array()) throw ConfigError(at + ": expected a row array");
      if (i == 0) {
        cols = v[i].size();
        m = DenseMatrix(rows, cols);
      } else if (v[i].size() != cols) {
        throw ConfigError(at + ": expected " + std::to_string(cols) + " entries");
      }
      for (std::size_t j = 0; j < cols; ++j) m(i, j) = element(v[i][j], at + "[" + std::to_string(j) + "]");
    }
    return m;
  }

  // Rejects keys outside `allowed`, so typos surface instead of silently defaulting.
  void only(std::initializer_list<const char*> allowed) const {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = node_->begin(); it != node_->end(); ++it)
      if (!ok.count(it.key())) fail_at(it.key(), "unknown field");
  }

 private:
  static double element(const json& e, const std::string& at) {
    if (e.is_number()) return e.get<double>();
    if (e.is_string()) {
      const auto s = e.get<std::string>();
      if (s == "inf") return std::numeric_limits<double>::infinity();
      if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw ConfigError(at + ": expected a number");
  }

  const json* node_;
  std::string path_;
};

// JSON has no infinities; they are written as the strings "inf" / "-inf".
inline json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline json matrix(const DenseMatrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) r.push_back(number(m(i, j)));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline void require_schema(const Reader& r) {
  const json& v = r.raw("schema");
  if (!v.is_number_integer() || v.get<long long>() != 1) r.fail_at("schema", "expected 1");
}

inline model::DWPConfig read_model(const Reader& r, std::size_t input_dim, std::size_t output_dim) {
  r.only({"depth", "widths", "inducing_count", "noise_variance", "kernel_variance",
          "kernel_lengthscale", "input_dim", "output_dim"});
  model::DWPConfig c;
  c.depth = r.count("depth", c.depth);
  c.input_dim = r.count("input_dim", input_dim);
  // hidden widths default to the input feature count
  c.widths = r.has("widths") ? r.counts("widths") : std::vector<std::size_t>(c.depth, c.input_dim);
  c.inducing_count = r.count("inducing_count", c.inducing_count);
  c.output_dim = r.count("output_dim", output_dim);
  c.noise_variance = r.number("noise_variance", c.noise_variance);
  c.kernel_variance = r.number("kernel_variance", c.kernel_variance);
  c.kernel_lengthscale = r.number("kernel_lengthscale", c.kernel_lengthscale);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    r.fail(e.what());
  }
  return c;
}

inline json write_model(const model::DWPConfig& c) {
  json widths = json::array();
  for (auto w : c.widths) widths.push_back(w);
  return {{"depth", c.depth},
          {"widths", widths},
          {"inducing_count", c.inducing_count},
          {"input_dim", c.input_dim},
          {"output_dim", c.output_dim},
          {"noise_variance", c.noise_variance},
          {"kernel_variance", c.kernel_variance},
          {"kernel_lengthscale", c.kernel_lengthscale}};
}

}  // namespace dwpkit::jsonio
