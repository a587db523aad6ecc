#pragma once

// Tabular regression data: CSV ingestion, train/test split and z-score
// normalisation fit on the training rows.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dwpkit/matrix.hpp"
#include "dwpkit/vi.hpp"

namespace dwpkit::data {

struct ColumnStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // population, over training rows

  DenseMatrix apply(const DenseMatrix& raw) const;
  DenseMatrix invert(const DenseMatrix& normalised) const;
};

struct Normalisation {
  ColumnStats x;
  ColumnStats y;

  vi::OutputScaling output_scaling() const { return {y.mean, y.stddev}; }
};

// Either explicit index lists or a seeded random test fraction.
struct SplitSpec {
  std::optional<std::vector<std::size_t>> train;
  std::optional<std::vector<std::size_t>> test;
  double test_fraction = 0.0;
  std::uint64_t seed = 0;
};

// Column by name or by position; negative positions count from the end.
using ColumnRef = std::variant<std::string, long>;

struct Dataset {
  std::vector<std::string> columns;  // file order
  DenseMatrix raw;                   // all columns, original units
  std::size_t target = 0;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  Normalisation norm;
  DenseMatrix x;  // normalised inputs, every row
  DenseMatrix y;  // normalised target, every row

  std::size_t input_dim() const { return x.cols(); }
  vi::RegressionData train_data() const;
  vi::RegressionData test_data() const;
  DenseMatrix raw_inputs(const std::vector<std::size_t>& rows) const;
  DenseMatrix raw_targets(const std::vector<std::size_t>& rows) const;
};

struct Table {
  std::vector<std::string> columns;
  DenseMatrix values;
};

// Numeric CSV. A header is detected by a non-numeric first row; without one
// the columns are named c0, c1, ...
Table read_table(const std::string& path);

// read_table followed by make_dataset.
Dataset ingest_csv(const std::string& path, const ColumnRef& target, const SplitSpec& split);

Dataset make_dataset(std::vector<std::string> columns, DenseMatrix raw, const ColumnRef& target,
                     const SplitSpec& split);

// Writes header and raw values; re-ingesting with the same target and split
// reproduces the normalised matrices exactly.
void write_csv(const Dataset& d, const std::string& path);

// y = sin(2x) + 0.3x + noise_sd * N(0, 1), x ~ U(-2, 2); columns "x", "y".
Dataset synthetic_regression(std::size_t n, std::uint64_t seed, double noise_sd,
                             const SplitSpec& split);

DenseMatrix select_rows(const DenseMatrix& m, const std::vector<std::size_t>& rows);

}  // namespace dwpkit::data
