// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "elastst/data_io.hpp"
#include "elastst/model.hpp"

namespace elastst {

// sum |x - x_hat| / sum |x|. Throws MetricError when sum |x| == 0.
double nmae(std::span<const double> actual, std::span<const double> predicted);
// sqrt(mean (x - x_hat)^2) / mean |x|.
double nrmse(std::span<const double> actual, std::span<const double> predicted);

struct MetricRow {
  std::size_t horizon = 0;
  double nmae = 0.0;
  double nrmse = 0.0;
  std::size_t windows = 0;
};

struct MetricReport {
  std::string dataset;
  std::string checkpoint;
  std::size_t lookback = 0;
  std::vector<MetricRow> rows;

  // horizon,nmae,nrmse,windows
  std::string to_csv() const;
  std::string to_table() const;
};

struct EvalOptions {
  std::size_t stride = 0;      // 0: non-overlapping (stride = horizon)
  std::size_t batch_size = 64; // windows per forward pass
  std::size_t threads = 1;
  bool mask_placeholders = true;
};

// Input-scale forecasts for each sample, computed in batches. The model is
// only read.
std::vector<std::vector<double>> predict_samples(const ModelState& model,
                                                 std::span<const Sample> samples,
                                                 const EvalOptions& options = {});

// For each horizon: strided windows over `split` (standardized), forecast,
// de-standardize with `scaler`, score.
MetricReport varied_horizon_eval(const ModelState& model, const Split& split,
                                 std::size_t lookback, std::span<const std::size_t> horizons,
                                 const Scaler& scaler, const EvalOptions& options = {});

// Same windows, forecasting the last observed value for every step.
MetricReport persistence_eval(const Split& split, std::size_t lookback,
                              std::span<const std::size_t> horizons, const Scaler& scaler,
                              std::size_t stride = 0);

}  // namespace elastst
