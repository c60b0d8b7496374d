// SPDX-License-Identifier: Apache-2.0
#include "elastst/eval.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "elastst/errors.hpp"

namespace elastst {

namespace {

void require_same_size(const char* metric, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(metric) + ": actual has " + std::to_string(a.size()) +
                         " entries, predicted has " + std::to_string(b.size()));
  }
  if (a.empty()) throw MetricError(std::string(metric) + ": no observations");
}

}  // namespace

double nmae(std::span<const double> actual, std::span<const double> predicted) {
  require_same_size("nmae", actual, predicted);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    num += std::abs(actual[i] - predicted[i]);
    den += std::abs(actual[i]);
  }
  if (den == 0.0) throw MetricError("nmae: observations sum to zero magnitude");
  return num / den;
}

double nrmse(std::span<const double> actual, std::span<const double> predicted) {
  require_same_size("nrmse", actual, predicted);
  double sq = 0.0, mag = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    sq += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
    mag += std::abs(actual[i]);
  }
  if (mag == 0.0) throw MetricError("nrmse: observations sum to zero magnitude");
  const double n = static_cast<double>(actual.size());
  return std::sqrt(sq / n) / (mag / n);
}

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os << "horizon,nmae,nrmse,windows\n";
  char buf[96];
  for (const MetricRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.10f,%.10f,%zu\n", r.horizon, r.nmae, r.nrmse, r.windows);
    os << buf;
  }
  return os.str();
}

std::string MetricReport::to_table() const {
  std::ostringstream os;
  char buf[96];
  if (!dataset.empty() || !checkpoint.empty()) {
    os << "dataset: " << dataset << "  checkpoint: " << checkpoint << "  lookback: " << lookback
       << '\n';
  }
  std::snprintf(buf, sizeof buf, "%8s  %10s  %10s  %8s\n", "horizon", "nmae", "nrmse", "windows");
  os << buf;
  for (const MetricRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%8zu  %10.6f  %10.6f  %8zu\n", r.horizon, r.nmae, r.nrmse,
                  r.windows);
    os << buf;
  }
  return os.str();
}

std::vector<std::vector<double>> predict_samples(const ModelState& model,
                                                 std::span<const Sample> samples,
                                                 const EvalOptions& options) {
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const std::size_t n_chunks = (samples.size() + batch - 1) / batch;
  std::vector<std::vector<double>> out(samples.size());
  ForwardOptions fo;
  fo.mask_placeholders = options.mask_placeholders;

  auto run_chunk = [&](std::size_t c) {
    const std::size_t begin = c * batch;
    const std::size_t end = std::min(samples.size(), begin + batch);
    std::vector<Window> windows;
    windows.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) windows.push_back(samples[i].window);
    Graph g(false);
    const Forecast f = forward(model, g, windows, fo);
    for (std::size_t i = begin; i < end; ++i) out[i] = f.values(i - begin);
  };

  const std::size_t threads = std::min(std::max<std::size_t>(1, options.threads), n_chunks);
  if (threads <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
    return out;
  }
  // Chunks are assigned round-robin; each writes only its own slots.
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t c = t; c < n_chunks; c += threads) run_chunk(c);
    });
  }
  for (std::thread& th : pool) th.join();
  return out;
}

namespace {

MetricRow score(std::span<const Sample> samples, const std::vector<std::vector<double>>& preds,
                const Scaler& scaler, std::size_t horizon) {
  std::vector<double> actual, predicted;
  actual.reserve(samples.size() * horizon);
  predicted.reserve(samples.size() * horizon);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::size_t k = samples[i].variate;
    for (std::size_t t = 0; t < horizon; ++t) {
      actual.push_back(scaler.inverse(samples[i].target[t], k));
      predicted.push_back(scaler.inverse(preds[i][t], k));
    }
  }
  MetricRow row;
  row.horizon = horizon;
  row.nmae = nmae(actual, predicted);
  row.nrmse = nrmse(actual, predicted);
  row.windows = samples.size();
  return row;
}

}  // namespace

MetricReport varied_horizon_eval(const ModelState& model, const Split& split,
                                 std::size_t lookback, std::span<const std::size_t> horizons,
                                 const Scaler& scaler, const EvalOptions& options) {
  MetricReport report;
  report.lookback = lookback;
  for (std::size_t T : horizons) {
    const std::vector<Sample> samples = stride_windows(split, lookback, T, options.stride);
    report.rows.push_back(score(samples, predict_samples(model, samples, options), scaler, T));
  }
  return report;
}

MetricReport persistence_eval(const Split& split, std::size_t lookback,
                              std::span<const std::size_t> horizons, const Scaler& scaler,
                              std::size_t stride) {
  MetricReport report;
  report.lookback = lookback;
  for (std::size_t T : horizons) {
    const std::vector<Sample> samples = stride_windows(split, lookback, T, stride);
    std::vector<std::vector<double>> preds;
    preds.reserve(samples.size());
    for (const Sample& s : samples) preds.emplace_back(T, s.window.context.back());
    report.rows.push_back(score(samples, preds, scaler, T));
  }
  return report;
}

}  // namespace elastst
