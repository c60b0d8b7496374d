// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "elastst/patching.hpp"
#include "elastst/random.hpp"

namespace elastst {

// Wide multivariate series: one timestamp column plus one column per variate.
struct Dataset {
  std::string name;
  std::string frequency;  // informational only
  std::vector<std::string> timestamps;
  std::vector<std::string> columns;  // variate names
  std::vector<double> values;        // length() x variates(), row-major
  bool integer_index = false;
  std::size_t rejected_rows = 0;     // rows dropped for non-finite values

  std::size_t length() const { return timestamps.size(); }
  std::size_t variates() const { return columns.size(); }
  double at(std::size_t t, std::size_t k) const { return values[t * variates() + k]; }
};

// Header row required; first column is the timestamp (integer index or
// ISO-8601 text), strictly increasing. Cells holding nan/inf (or empty)
// reject the whole row; any other unparsable cell is an IngestionError.
Dataset load_csv(const std::filesystem::path& path);
Dataset parse_csv(std::istream& is, const std::string& name);
void write_csv(const std::filesystem::path& path, const Dataset& ds);

// A contiguous time slice of a dataset.
struct Split {
  std::size_t begin = 0;  // first row in the source dataset
  std::size_t length = 0;
  std::size_t variates = 0;
  std::vector<double> values;  // length x variates

  double at(std::size_t t, std::size_t k) const { return values[t * variates + k]; }
  std::vector<double> segment(std::size_t k, std::size_t start, std::size_t len) const;
};

// Per-variate standardization fitted on the training split.
struct Scaler {
  std::vector<double> mean;
  std::vector<double> std;

  static Scaler fit(const Split& train);
  double transform(double x, std::size_t k) const { return (x - mean[k]) / std[k]; }
  double inverse(double z, std::size_t k) const { return z * std[k] + mean[k]; }
  void transform_in_place(Split& s) const;
  void inverse_in_place(Split& s) const;
};

struct SplitSpec {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;

  void validate() const;
};

struct SplitData {
  Split train, val, test;  // all standardized with `scaler`
  Scaler scaler;
};

Split slice_dataset(const Dataset& ds, std::size_t begin, std::size_t length);

// Throws SizingError when any split is shorter than min_length.
SplitData split_and_scale(const Dataset& ds, const SplitSpec& spec, std::size_t min_length);

// One channel-independent training/evaluation item.
struct Sample {
  Window window;
  std::vector<double> target;  // the horizon_len values after the context
  std::size_t variate = 0;
  std::size_t start = 0;       // row of the first context value within the split
};

std::vector<Sample> sample_windows(const Split& split, std::size_t lookback, std::size_t horizon,
                                   std::size_t count, rng::Engine& rng);
std::vector<Sample> sample_windows(const Split& split, std::size_t lookback, std::size_t horizon,
                                   std::size_t count, std::uint64_t seed);
// Left to right with the given stride (0 means stride = horizon); variates
// are enumerated for each start position.
std::vector<Sample> stride_windows(const Split& split, std::size_t lookback, std::size_t horizon,
                                   std::size_t stride = 0);

// a_k sin(2 pi t / 24) + b_k sin(2 pi t / 96) + N(0, noise^2), with a_k, b_k
// drawn from [0.5, 1.5] per variate.
Dataset make_sine_dataset(std::size_t length, std::size_t variates, std::uint64_t seed,
                          double noise = 0.1);

}  // namespace elastst
