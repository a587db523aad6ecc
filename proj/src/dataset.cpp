#include "dwpkit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dwpkit/random.hpp"

namespace dwpkit::data {

namespace {

struct Record {
  long line = 0;
  std::vector<std::string> fields;
};

// RFC-4180 records: quoted fields may hold commas, doubled quotes and newlines.
std::vector<Record> parse_records(const std::string& text) {
  std::vector<Record> out;
  Record rec;
  std::string field;
  bool quoted = false;
  bool any = false;
  long line = 1;
  rec.line = 1;
  auto end_record = [&] {
    if (any || !field.empty() || !rec.fields.empty()) {
      rec.fields.push_back(field);
      out.push_back(std::move(rec));
    }
    rec = Record{};
    field.clear();
    any = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      rec.fields.push_back(field);
      field.clear();
      any = true;
    } else if (c == '\n') {
      end_record();
      rec.line = ++line;
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", line, static_cast<long>(rec.fields.size()) + 1);
  end_record();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_number(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty()) return std::nullopt;
  const char* first = s.data();
  if (*first == '+') ++first;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

ColumnStats fit_stats(const DenseMatrix& m, const std::vector<std::size_t>& rows,
                      const std::vector<std::string>& names) {
  ColumnStats s;
  const double n = static_cast<double>(rows.size());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r : rows) mean += m(r, c);
    mean /= n;
    double ss = 0.0;
    for (std::size_t r : rows) ss += (m(r, c) - mean) * (m(r, c) - mean);
    const double sd = std::sqrt(ss / n);
    if (!(sd > 0.0)) {
      throw ConstantColumn("column '" + names[c] + "' has zero variance on the training rows");
    }
    s.mean.push_back(mean);
    s.stddev.push_back(sd);
  }
  return s;
}

std::size_t resolve_target(const ColumnRef& ref, const std::vector<std::string>& columns) {
  const long n = static_cast<long>(columns.size());
  if (const auto* name = std::get_if<std::string>(&ref)) {
    const auto it = std::find(columns.begin(), columns.end(), *name);
    if (it == columns.end()) throw ConfigError("target column '" + *name + "' not found");
    return static_cast<std::size_t>(it - columns.begin());
  }
  long k = std::get<long>(ref);
  if (k < 0) k += n;
  if (k < 0 || k >= n) {
    throw ConfigError("target column index " + std::to_string(std::get<long>(ref)) +
                      " out of range for " + std::to_string(n) + " columns");
  }
  return static_cast<std::size_t>(k);
}

void resolve_split(const SplitSpec& spec, std::size_t n, std::vector<std::size_t>& train,
                   std::vector<std::size_t>& test) {
  std::vector<char> role(n, 0);  // 0 unassigned, 1 train, 2 test
  auto assign = [&](const std::vector<std::size_t>& idx, char r, const char* what) {
    for (std::size_t i : idx) {
      if (i >= n) throw ConfigError(std::string("split.") + what + ": row " + std::to_string(i) + " out of range");
      if (role[i] != 0) throw ConfigError(std::string("split.") + what + ": row " + std::to_string(i) + " listed twice");
      role[i] = r;
    }
  };
  if (spec.train || spec.test) {
    if (spec.train) assign(*spec.train, 1, "train");
    if (spec.test) assign(*spec.test, 2, "test");
    const char rest = spec.train ? 2 : 1;
    for (auto& r : role)
      if (r == 0) r = spec.train && spec.test ? 0 : rest;
  } else {
    if (!(spec.test_fraction >= 0.0 && spec.test_fraction < 1.0)) {
      throw ConfigError("split.test_fraction must be in [0, 1)");
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    RandomStream rng(spec.seed);
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
      std::swap(perm[i - 1], perm[std::min(j, i - 1)]);
    }
    const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(n)));
    for (std::size_t k = 0; k < n; ++k) role[perm[k]] = k < n_test ? 2 : 1;
  }
  train.clear();
  test.clear();
  for (std::size_t i = 0; i < n; ++i) {
    if (role[i] == 1) train.push_back(i);
    if (role[i] == 2) test.push_back(i);
  }
  if (train.empty()) throw ConfigError("split leaves no training rows");
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q.push_back('"');
    q.push_back(c);
  }
  return q + "\"";
}

}  // namespace

DenseMatrix ColumnStats::apply(const DenseMatrix& raw) const {
  if (raw.cols() != mean.size()) throw ShapeMismatch("normalisation: column count differs");
  DenseMatrix m(raw.rows(), raw.cols());
  for (std::size_t i = 0; i < raw.rows(); ++i)
    for (std::size_t j = 0; j < raw.cols(); ++j) m(i, j) = (raw(i, j) - mean[j]) / stddev[j];
  return m;
}

DenseMatrix ColumnStats::invert(const DenseMatrix& normalised) const {
  if (normalised.cols() != mean.size()) throw ShapeMismatch("normalisation: column count differs");
  DenseMatrix m(normalised.rows(), normalised.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = normalised(i, j) * stddev[j] + mean[j];
  return m;
}

DenseMatrix select_rows(const DenseMatrix& m, const std::vector<std::size_t>& rows) {
  DenseMatrix out(rows.size(), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k)
    for (std::size_t j = 0; j < m.cols(); ++j) out(k, j) = m(rows[k], j);
  return out;
}

vi::RegressionData Dataset::train_data() const {
  return {select_rows(x, train_rows), select_rows(y, train_rows)};
}

vi::RegressionData Dataset::test_data() const {
  return {select_rows(x, test_rows), select_rows(y, test_rows)};
}

DenseMatrix Dataset::raw_inputs(const std::vector<std::size_t>& rows) const {
  DenseMatrix m(rows.size(), raw.cols() - 1);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < raw.cols(); ++j)
      if (j != target) m(k, c++) = raw(rows[k], j);
  }
  return m;
}

DenseMatrix Dataset::raw_targets(const std::vector<std::size_t>& rows) const {
  DenseMatrix m(rows.size(), 1);
  for (std::size_t k = 0; k < rows.size(); ++k) m(k, 0) = raw(rows[k], target);
  return m;
}

Dataset make_dataset(std::vector<std::string> columns, DenseMatrix raw, const ColumnRef& target,
                     const SplitSpec& split) {
  if (columns.size() != raw.cols()) throw ShapeMismatch("dataset: names and columns differ");
  if (raw.cols() < 2) throw ConfigError("dataset needs at least one input and one target column");
  if (raw.rows() == 0) throw ConfigError("dataset has no rows");
  Dataset d;
  d.columns = std::move(columns);
  d.raw = std::move(raw);
  d.target = resolve_target(target, d.columns);
  resolve_split(split, d.raw.rows(), d.train_rows, d.test_rows);

  std::vector<std::size_t> all(d.raw.rows());
  std::iota(all.begin(), all.end(), 0);
  const DenseMatrix xr = d.raw_inputs(all);
  const DenseMatrix yr = d.raw_targets(all);
  std::vector<std::string> xnames;
  for (std::size_t j = 0; j < d.columns.size(); ++j)
    if (j != d.target) xnames.push_back(d.columns[j]);
  d.norm.x = fit_stats(xr, d.train_rows, xnames);
  d.norm.y = fit_stats(yr, d.train_rows, {d.columns[d.target]});
  d.x = d.norm.x.apply(xr);
  d.y = d.norm.y.apply(yr);
  return d;
}

Table read_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open data file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) text.erase(0, 3);
  const auto records = parse_records(text);
  if (records.empty()) throw ParseError("empty file", 1, 1);

  Table t;
  std::size_t first = 0;
  const auto& head = records.front().fields;
  const bool header = std::any_of(head.begin(), head.end(),
                                  [](const std::string& f) { return !parse_number(f).has_value(); });
  if (header) {
    for (const auto& f : head) t.columns.push_back(trim(f));
    first = 1;
  } else {
    for (std::size_t j = 0; j < head.size(); ++j) t.columns.push_back("c" + std::to_string(j));
  }
  const std::size_t cols = t.columns.size();
  t.values = DenseMatrix(records.size() - first, cols);
  for (std::size_t r = first; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != cols) {
      throw ParseError("expected " + std::to_string(cols) + " fields, found " +
                           std::to_string(rec.fields.size()),
                       rec.line, static_cast<long>(std::min(rec.fields.size(), cols)) + 1);
    }
    for (std::size_t j = 0; j < cols; ++j) {
      const auto v = parse_number(rec.fields[j]);
      if (!v) {
        throw ParseError("not a finite number: '" + rec.fields[j] + "'", rec.line,
                         static_cast<long>(j) + 1);
      }
      t.values(r - first, j) = *v;
    }
  }
  return t;
}

Dataset ingest_csv(const std::string& path, const ColumnRef& target, const SplitSpec& split) {
  Table t = read_table(path);
  return make_dataset(std::move(t.columns), std::move(t.values), target, split);
}

void write_csv(const Dataset& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  for (std::size_t j = 0; j < d.columns.size(); ++j)
    out << (j ? "," : "") << quote_if_needed(d.columns[j]);
  out << "\n";
  for (std::size_t i = 0; i < d.raw.rows(); ++i) {
    for (std::size_t j = 0; j < d.raw.cols(); ++j) out << (j ? "," : "") << format_double(d.raw(i, j));
    out << "\n";
  }
}

Dataset synthetic_regression(std::size_t n, std::uint64_t seed, double noise_sd,
                             const SplitSpec& split) {
  RandomStream rng(seed);
  DenseMatrix raw(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = -2.0 + 4.0 * rng.uniform();
    raw(i, 0) = x;
    raw(i, 1) = std::sin(2.0 * x) + 0.3 * x + noise_sd * rng.normal();
  }
  return make_dataset({"x", "y"}, std::move(raw), ColumnRef{std::string("y")}, split);
}

}  // namespace dwpkit::data
