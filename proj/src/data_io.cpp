// SPDX-License-Identifier: Apache-2.0
#include "elastst/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "elastst/checkpoint.hpp"
#include "elastst/errors.hpp"

namespace elastst {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

bool parse_integer(std::string_view s, long long& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

enum class Cell { kOk, kMissing, kBad };

Cell parse_cell(std::string_view s, double& out) {
  if (s.empty()) return Cell::kMissing;
  std::string_view body = s;
  if (body.front() == '+') body.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), out);
  if (ptr != body.data() + body.size()) return Cell::kBad;
  if (ec == std::errc::result_out_of_range) return Cell::kMissing;
  if (ec != std::errc()) return Cell::kBad;
  return std::isfinite(out) ? Cell::kOk : Cell::kMissing;
}

}  // namespace

Dataset parse_csv(std::istream& is, const std::string& name) {
  Dataset ds;
  ds.name = name;
  std::string line;
  if (!std::getline(is, line)) throw IngestionError(name + ": empty file, header row required");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_fields(line);
  if (header.size() < 2) {
    throw IngestionError(name + ": need a timestamp column and at least one variate column");
  }
  for (std::size_t c = 1; c < header.size(); ++c) ds.columns.emplace_back(header[c]);
  const std::size_t K = ds.columns.size();

  std::vector<long long> int_stamps;
  bool all_int = true;
  std::vector<double> row(K);
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw IngestionError(name + ": line " + std::to_string(line_no) + " has " +
                           std::to_string(fields.size()) + " fields, header has " +
                           std::to_string(header.size()));
    }
    bool rejected = false;
    for (std::size_t c = 0; c < K; ++c) {
      switch (parse_cell(fields[c + 1], row[c])) {
        case Cell::kOk:
          break;
        case Cell::kMissing:
          rejected = true;
          break;
        case Cell::kBad:
          throw IngestionError(name + ": cannot parse '" + std::string(fields[c + 1]) +
                               "' at line " + std::to_string(line_no) + ", column " +
                               std::to_string(c + 2) + " (" + ds.columns[c] + ")");
      }
    }
    if (rejected) {
      ++ds.rejected_rows;
      continue;
    }
    long long stamp = 0;
    if (all_int && parse_integer(fields[0], stamp)) {
      int_stamps.push_back(stamp);
    } else {
      all_int = false;
    }
    ds.timestamps.emplace_back(fields[0]);
    ds.values.insert(ds.values.end(), row.begin(), row.end());
  }
  ds.integer_index = all_int && !ds.timestamps.empty();
  for (std::size_t t = 1; t < ds.timestamps.size(); ++t) {
    const bool increasing = ds.integer_index ? int_stamps[t] > int_stamps[t - 1]
                                             : ds.timestamps[t] > ds.timestamps[t - 1];
    if (!increasing) {
      throw IngestionError(name + ": timestamps must be strictly increasing ('" +
                           ds.timestamps[t - 1] + "' then '" + ds.timestamps[t] + "')");
    }
  }
  ds.frequency = ds.integer_index ? "index" : "";
  return ds;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IngestionError("cannot open " + path.string());
  return parse_csv(is, path.filename().string());
}

void write_csv(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IngestionError("cannot write " + path.string());
  os << "timestamp";
  for (const std::string& c : ds.columns) os << ',' << c;
  os << '\n';
  for (std::size_t t = 0; t < ds.length(); ++t) {
    os << ds.timestamps[t];
    for (std::size_t k = 0; k < ds.variates(); ++k) os << ',' << format_double(ds.at(t, k));
    os << '\n';
  }
}

std::vector<double> Split::segment(std::size_t k, std::size_t start, std::size_t len) const {
  std::vector<double> out(len);
  for (std::size_t i = 0; i < len; ++i) out[i] = at(start + i, k);
  return out;
}

Scaler Scaler::fit(const Split& train) {
  if (train.length == 0) throw SizingError("scaler: empty training split");
  Scaler s;
  s.mean.assign(train.variates, 0.0);
  s.std.assign(train.variates, 1.0);
  const double n = static_cast<double>(train.length);
  for (std::size_t k = 0; k < train.variates; ++k) {
    double lo = train.at(0, k), hi = lo, mu = 0.0;
    for (std::size_t t = 0; t < train.length; ++t) {
      const double v = train.at(t, k);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      mu += v;
    }
    mu = lo == hi ? lo : mu / n;
    double var = 0.0;
    for (std::size_t t = 0; t < train.length; ++t) var += (train.at(t, k) - mu) * (train.at(t, k) - mu);
    const double sd = std::sqrt(var / n);
    s.mean[k] = mu;
    s.std[k] = sd < 1e-8 ? 1.0 : sd;
  }
  return s;
}

void Scaler::transform_in_place(Split& s) const {
  for (std::size_t t = 0; t < s.length; ++t)
    for (std::size_t k = 0; k < s.variates; ++k)
      s.values[t * s.variates + k] = transform(s.values[t * s.variates + k], k);
}

void Scaler::inverse_in_place(Split& s) const {
  for (std::size_t t = 0; t < s.length; ++t)
    for (std::size_t k = 0; k < s.variates; ++k)
      s.values[t * s.variates + k] = inverse(s.values[t * s.variates + k], k);
}

void SplitSpec::validate() const {
  if (!(train > 0.0 && val > 0.0 && test > 0.0)) {
    throw ParameterError("split fractions must all be positive");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw ParameterError("split fractions must sum to 1");
  }
}

Split slice_dataset(const Dataset& ds, std::size_t begin, std::size_t length) {
  if (begin + length > ds.length()) throw SizingError("slice beyond end of dataset");
  Split s;
  s.begin = begin;
  s.length = length;
  s.variates = ds.variates();
  s.values.assign(ds.values.begin() + static_cast<long>(begin * s.variates),
                  ds.values.begin() + static_cast<long>((begin + length) * s.variates));
  return s;
}

SplitData split_and_scale(const Dataset& ds, const SplitSpec& spec, std::size_t min_length) {
  spec.validate();
  const std::size_t V = ds.length();
  const std::size_t n_train = static_cast<std::size_t>(std::floor(static_cast<double>(V) * spec.train));
  const std::size_t n_val = static_cast<std::size_t>(std::floor(static_cast<double>(V) * spec.val));
  const std::size_t n_test = V - n_train - n_val;
  const std::pair<const char*, std::size_t> sizes[] = {
      {"train", n_train}, {"validation", n_val}, {"test", n_test}};
  for (const auto& [label, n] : sizes) {
    if (n < min_length) {
      throw SizingError(std::string(label) + " split of " + ds.name + " has " + std::to_string(n) +
                        " rows, needs at least " + std::to_string(min_length) +
                        " (lookback + horizon); short by " + std::to_string(min_length - n));
    }
  }
  SplitData out;
  out.train = slice_dataset(ds, 0, n_train);
  out.val = slice_dataset(ds, n_train, n_val);
  out.test = slice_dataset(ds, n_train + n_val, n_test);
  out.scaler = Scaler::fit(out.train);
  out.scaler.transform_in_place(out.train);
  out.scaler.transform_in_place(out.val);
  out.scaler.transform_in_place(out.test);
  return out;
}

namespace {

void require_room(const Split& split, std::size_t lookback, std::size_t horizon) {
  if (lookback == 0 || horizon == 0) {
    throw ParameterError("windows need a positive lookback and horizon");
  }
  if (split.length < lookback + horizon) {
    throw SizingError("split of " + std::to_string(split.length) + " rows is too short for " +
                      "lookback " + std::to_string(lookback) + " + horizon " +
                      std::to_string(horizon) + " = " + std::to_string(lookback + horizon));
  }
  if (split.variates == 0) throw SizingError("split has no variates");
}

Sample make_sample(const Split& split, std::size_t k, std::size_t start, std::size_t lookback,
                   std::size_t horizon) {
  Sample s;
  s.variate = k;
  s.start = start;
  s.window.context = split.segment(k, start, lookback);
  s.window.horizon_len = horizon;
  s.target = split.segment(k, start + lookback, horizon);
  return s;
}

}  // namespace

std::vector<Sample> sample_windows(const Split& split, std::size_t lookback, std::size_t horizon,
                                   std::size_t count, rng::Engine& e) {
  require_room(split, lookback, horizon);
  const std::size_t starts = split.length - lookback - horizon + 1;
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t k = rng::uniform_index(e, split.variates);
    const std::size_t start = rng::uniform_index(e, starts);
    out.push_back(make_sample(split, k, start, lookback, horizon));
  }
  return out;
}

std::vector<Sample> sample_windows(const Split& split, std::size_t lookback, std::size_t horizon,
                                   std::size_t count, std::uint64_t seed) {
  rng::Engine e = rng::make_engine({seed});
  return sample_windows(split, lookback, horizon, count, e);
}

std::vector<Sample> stride_windows(const Split& split, std::size_t lookback, std::size_t horizon,
                                   std::size_t stride) {
  require_room(split, lookback, horizon);
  if (stride == 0) stride = horizon;
  std::vector<Sample> out;
  for (std::size_t start = 0; start + lookback + horizon <= split.length; start += stride)
    for (std::size_t k = 0; k < split.variates; ++k)
      out.push_back(make_sample(split, k, start, lookback, horizon));
  return out;
}

Dataset make_sine_dataset(std::size_t length, std::size_t variates, std::uint64_t seed,
                          double noise) {
  rng::Engine e = rng::make_engine({seed, 0x73696e65ULL});
  Dataset ds;
  ds.name = "sine";
  ds.frequency = "index";
  ds.integer_index = true;
  std::vector<double> a(variates), b(variates);
  for (std::size_t k = 0; k < variates; ++k) {
    a[k] = rng::uniform(e, 0.5, 1.5);
    b[k] = rng::uniform(e, 0.5, 1.5);
    ds.columns.push_back("v" + std::to_string(k));
  }
  const double two_pi = 2.0 * std::numbers::pi;
  ds.values.resize(length * variates);
  for (std::size_t t = 0; t < length; ++t) {
    ds.timestamps.push_back(std::to_string(t));
    const double tt = static_cast<double>(t);
    for (std::size_t k = 0; k < variates; ++k) {
      ds.values[t * variates + k] = a[k] * std::sin(two_pi * tt / 24.0) +
                                    b[k] * std::sin(two_pi * tt / 96.0) + noise * rng::normal(e);
    }
  }
  return ds;
}

}  // namespace elastst
