// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <sstream>

#include "elastst/errors.hpp"
#include "elastst/data_io.hpp"
#include "test_util.hpp"

using namespace elastst;
using testutil::bitwise_equal;

namespace {

Dataset parse(const std::string& text) {
  std::istringstream is(text);
  return parse_csv(is, "mem.csv");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const IngestionError& e) {
    return e.what();
  }
  return "";
}

Dataset random_dataset(std::size_t V, std::size_t K, std::uint64_t seed) {
  std::mt19937_64 e(seed);
  std::normal_distribution<double> nd(4.0, 3.0);
  Dataset ds;
  ds.name = "rand";
  for (std::size_t k = 0; k < K; ++k) ds.columns.push_back("c" + std::to_string(k));
  for (std::size_t t = 0; t < V; ++t) {
    ds.timestamps.push_back(std::to_string(t));
    for (std::size_t k = 0; k < K; ++k) ds.values.push_back(nd(e));
  }
  ds.integer_index = true;
  return ds;
}

}  // namespace

TEST_CASE("csv: three rows, two variates") {
  const Dataset ds = parse(
      "date,a,b\n"
      "2016-07-01 00:00:00,1.5,-2\n"
      "2016-07-01 01:00:00,2.5,3e1\n"
      "2016-07-01 02:00:00,0,4.25\n");
  CHECK(ds.length() == 3);
  CHECK(ds.variates() == 2);
  CHECK(ds.columns == std::vector<std::string>{"a", "b"});
  CHECK_FALSE(ds.integer_index);
  CHECK(ds.at(0, 1) == -2.0);
  CHECK(ds.at(1, 1) == 30.0);
  CHECK(ds.at(2, 0) == 0.0);
  CHECK(ds.timestamps[2] == "2016-07-01 02:00:00");
  CHECK(ds.rejected_rows == 0);
}

TEST_CASE("csv: integer index, CRLF and blank lines") {
  const Dataset ds = parse("t,x\r\n0,1\r\n\r\n1,2\r\n10,3\r\n");
  CHECK(ds.integer_index);
  CHECK(ds.length() == 3);
  CHECK(ds.at(2, 0) == 3.0);
  // Integers compare numerically, not as text.
  CHECK_NOTHROW(parse("t,x\n9,1\n10,2\n"));
}

TEST_CASE("csv: ingestion errors") {
  CHECK(error_of("t,x\n1,1\n1,2\n").find("strictly increasing") != std::string::npos);
  CHECK(error_of("t,x\n2,1\n1,2\n").find("strictly increasing") != std::string::npos);
  CHECK(error_of("t,x\n2020-01-02,1\n2020-01-01,2\n").find("strictly increasing") !=
        std::string::npos);
  const std::string bad = error_of("t,x,y\n0,1,2\n1,3,abc\n");
  CHECK(bad.find("line 3") != std::string::npos);
  CHECK(bad.find("column 3") != std::string::npos);
  CHECK(bad.find("abc") != std::string::npos);
  CHECK_FALSE(error_of("t\n0\n1\n").empty());
  CHECK_FALSE(error_of("").empty());
  CHECK(error_of("t,x\n0,1,2\n").find("fields") != std::string::npos);
}

TEST_CASE("csv: non-finite rows are rejected and counted") {
  const Dataset ds = parse("t,x,y\n0,1,2\n1,nan,3\n2,4,inf\n3,,5\n4,6,7\n5,-Infinity,1\n");
  CHECK(ds.length() == 2);
  CHECK(ds.rejected_rows == 4);
  CHECK(ds.timestamps == std::vector<std::string>{"0", "4"});
  for (double v : ds.values) CHECK(std::isfinite(v));
}

TEST_CASE("csv: file round-trip") {
  const Dataset ds = random_dataset(50, 3, 1);
  const auto path = std::filesystem::temp_directory_path() / "elastst_test_roundtrip.csv";
  write_csv(path, ds);
  const Dataset back = load_csv(path);
  std::filesystem::remove(path);
  CHECK(back.timestamps == ds.timestamps);
  CHECK(back.columns == ds.columns);
  CHECK(bitwise_equal(back.values, ds.values));
  CHECK_THROWS_AS(load_csv("/nonexistent/dir/x.csv"), IngestionError);
}

TEST_CASE("scaler: standardizes a mean-5 std-2 variate") {
  // Values 3 and 7 alternate: mean 5, population std 2.
  Dataset ds;
  ds.columns = {"x", "c"};
  for (std::size_t t = 0; t < 100; ++t) {
    ds.timestamps.push_back(std::to_string(t));
    ds.values.push_back(t % 2 ? 7.0 : 3.0);
    ds.values.push_back(42.5);
  }
  const SplitData d = split_and_scale(ds, SplitSpec{}, 1);
  CHECK(d.scaler.mean[0] == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(d.scaler.std[0] == doctest::Approx(2.0).epsilon(1e-15));
  double mu = 0.0, var = 0.0;
  for (std::size_t t = 0; t < d.train.length; ++t) mu += d.train.at(t, 0);
  mu /= static_cast<double>(d.train.length);
  for (std::size_t t = 0; t < d.train.length; ++t) var += std::pow(d.train.at(t, 0) - mu, 2);
  var /= static_cast<double>(d.train.length);
  CHECK(std::abs(mu) <= 1e-12);
  CHECK(std::abs(std::sqrt(var) - 1.0) <= 1e-12);
  // Constant variate: std guard, transformed to zeros everywhere.
  CHECK(d.scaler.std[1] == 1.0);
  for (const Split* s : {&d.train, &d.val, &d.test})
    for (std::size_t t = 0; t < s->length; ++t) CHECK(s->at(t, 1) == 0.0);
}

TEST_CASE("scaler: inverse round-trip") {
  const Dataset ds = random_dataset(400, 5, 2);
  const SplitData d = split_and_scale(ds, SplitSpec{}, 1);
  Split all = slice_dataset(ds, 0, ds.length());
  const Split original = all;
  d.scaler.transform_in_place(all);
  d.scaler.inverse_in_place(all);
  for (std::size_t i = 0; i < all.values.size(); ++i)
    CHECK(std::abs(all.values[i] - original.values[i]) <= 1e-12 * std::abs(original.values[i]) + 1e-300);
}

TEST_CASE("scaler: no leakage from validation or test") {
  Dataset a = random_dataset(300, 3, 3);
  const SplitData da = split_and_scale(a, SplitSpec{}, 1);
  for (std::size_t t = da.train.length; t < a.length(); ++t)
    for (std::size_t k = 0; k < 3; ++k) a.values[t * 3 + k] = 1e6 * static_cast<double>(t + k);
  const SplitData db = split_and_scale(a, SplitSpec{}, 1);
  CHECK(bitwise_equal(da.scaler.mean, db.scaler.mean));
  CHECK(bitwise_equal(da.scaler.std, db.scaler.std));
  CHECK(bitwise_equal(da.train.values, db.train.values));
}

TEST_CASE("splits: contiguous, ordered and sized") {
  const Dataset ds = random_dataset(1000, 2, 4);
  const SplitData d = split_and_scale(ds, SplitSpec{}, 50);
  CHECK(d.train.begin == 0);
  CHECK(d.train.length == 700);
  CHECK(d.val.begin == 700);
  CHECK(d.val.length == 100);
  CHECK(d.test.begin == 800);
  CHECK(d.test.length == 200);
  try {
    split_and_scale(ds, SplitSpec{}, 150);
    FAIL("expected SizingError");
  } catch (const SizingError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("validation") != std::string::npos);
    CHECK(msg.find("short by 50") != std::string::npos);
  }
  CHECK_THROWS_AS(split_and_scale(ds, SplitSpec{0.5, 0.5, 0.0}, 1), ParameterError);
  CHECK_THROWS_AS(split_and_scale(ds, SplitSpec{0.5, 0.3, 0.3}, 1), ParameterError);
  CHECK_THROWS_AS(SplitSpec({-0.1, 0.6, 0.5}).validate(), ParameterError);
}

TEST_CASE("stride windows") {
  const Dataset ds = random_dataset(30, 3, 5);
  const Split s = slice_dataset(ds, 0, 30);
  // Length exactly L + T with stride T: one window per variate.
  const std::vector<Sample> one = stride_windows(s, 20, 10);
  REQUIRE(one.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(one[k].variate == k);
    CHECK(one[k].start == 0);
  }
  CHECK(stride_windows(s, 10, 5).size() == 3 * 4);
  CHECK(stride_windows(s, 10, 5, 1).size() == 3 * 16);
  CHECK_THROWS_AS(stride_windows(s, 21, 10), SizingError);
  CHECK_THROWS_AS(stride_windows(s, 0, 10), ParameterError);
  for (const Sample& x : stride_windows(s, 7, 4, 3)) {
    REQUIRE(x.window.context.size() == 7);
    REQUIRE(x.target.size() == 4);
    CHECK(x.window.horizon_len == 4);
    // target[0] follows the last context point.
    CHECK(x.window.context.back() == ds.at(x.start + 6, x.variate));
    CHECK(x.target.front() == ds.at(x.start + 7, x.variate));
  }
}

TEST_CASE("random windows: reproducible and aligned with the source") {
  const Dataset ds = random_dataset(200, 4, 6);
  const Split s = slice_dataset(ds, 50, 150);
  const std::vector<Sample> a = sample_windows(s, 24, 12, 300, 77);
  const std::vector<Sample> b = sample_windows(s, 24, 12, 300, 77);
  const std::vector<Sample> c = sample_windows(s, 24, 12, 300, 78);
  REQUIRE(a.size() == 300);
  bool differ = false;
  std::vector<int> seen(4, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].start == b[i].start);
    CHECK(a[i].variate == b[i].variate);
    CHECK(bitwise_equal(a[i].target, b[i].target));
    differ = differ || a[i].start != c[i].start || a[i].variate != c[i].variate;
    REQUIRE(a[i].start + 36 <= 150);
    ++seen[a[i].variate];
    for (std::size_t t = 0; t < 24; ++t)
      CHECK(a[i].window.context[t] == ds.at(50 + a[i].start + t, a[i].variate));
    for (std::size_t t = 0; t < 12; ++t)
      CHECK(a[i].target[t] == ds.at(50 + a[i].start + 24 + t, a[i].variate));
  }
  CHECK(differ);
  for (int n : seen) CHECK(n > 0);
  CHECK_THROWS_AS(sample_windows(s, 140, 12, 1, 0), SizingError);
}

TEST_CASE("synthetic sine dataset") {
  // Noise-free: every variate is exactly a sin(2 pi t/24) + b sin(2 pi t/96).
  const Dataset clean = make_sine_dataset(500, 3, 0, 0.0);
  CHECK(clean.length() == 500);
  CHECK(clean.variates() == 3);
  CHECK(clean.integer_index);
  const double w1 = 2.0 * std::numbers::pi / 24.0, w2 = 2.0 * std::numbers::pi / 96.0;
  auto fit = [&](const Dataset& ds, std::size_t k) {
    // Least squares for (a, b) via the 2x2 normal equations.
    double s11 = 0, s12 = 0, s22 = 0, r1 = 0, r2 = 0;
    for (std::size_t t = 0; t < ds.length(); ++t) {
      const double x1 = std::sin(w1 * static_cast<double>(t));
      const double x2 = std::sin(w2 * static_cast<double>(t));
      s11 += x1 * x1;
      s12 += x1 * x2;
      s22 += x2 * x2;
      r1 += x1 * ds.at(t, k);
      r2 += x2 * ds.at(t, k);
    }
    const double det = s11 * s22 - s12 * s12;
    return std::pair{(r1 * s22 - r2 * s12) / det, (s11 * r2 - s12 * r1) / det};
  };
  for (std::size_t k = 0; k < 3; ++k) {
    const auto [a, b] = fit(clean, k);
    CHECK(a >= 0.5);
    CHECK(a <= 1.5);
    CHECK(b >= 0.5);
    CHECK(b <= 1.5);
    for (std::size_t t = 0; t < 500; ++t) {
      const double want = a * std::sin(w1 * static_cast<double>(t)) + b * std::sin(w2 * static_cast<double>(t));
      CHECK(std::abs(clean.at(t, k) - want) < 1e-9);
    }
  }
  // Default noise: residual std near 0.1.
  const Dataset noisy = make_sine_dataset(6000, 4, 0);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto [a, b] = fit(noisy, k);
    double ss = 0.0;
    for (std::size_t t = 0; t < 6000; ++t) {
      const double r = noisy.at(t, k) - a * std::sin(w1 * static_cast<double>(t)) -
                       b * std::sin(w2 * static_cast<double>(t));
      ss += r * r;
    }
    CHECK(std::sqrt(ss / 6000.0) == doctest::Approx(0.1).epsilon(0.05));
  }
  CHECK(bitwise_equal(make_sine_dataset(100, 2, 9).values, make_sine_dataset(100, 2, 9).values));
}
