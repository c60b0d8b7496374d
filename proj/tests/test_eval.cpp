// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "elastst/errors.hpp"
#include "elastst/eval.hpp"
#include "test_util.hpp"

using namespace elastst;
using testutil::bitwise_equal;

namespace {

ModelState small_model(std::uint64_t seed) {
  ElasTSTConfig c;
  c.patch_sizes = {4, 8};
  c.lookback = 32;
  c.attention.d_model = 16;
  c.attention.n_heads = 2;
  c.attention.head_dim = 8;
  c.attention.d_ff = 24;
  c.attention.n_layers = 1;
  c.period_spec.head_dim = 8;
  ModelState m = ModelState::init(c, seed);
  rng::Engine e = rng::make_engine({seed, 5});
  for (const NamedTensor& p : m.parameters()) {
    Tensor t = p.tensor;
    for (double& v : t.data()) v += 0.05 * rng::normal(e);
  }
  return m;
}

SplitData small_data() { return split_and_scale(make_sine_dataset(2000, 3, 1), SplitSpec{}, 1); }

}  // namespace

TEST_CASE("nmae examples") {
  const std::vector<double> x{1.0, -2.0, 3.5, 0.25};
  CHECK(nmae(x, x) == 0.0);
  CHECK(nmae(x, std::vector<double>(4, 0.0)) == 1.0);
  CHECK(nmae(std::vector<double>{1, 2}, std::vector<double>{2, 2}) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(nmae(std::vector<double>{0, 0}, std::vector<double>{1, 1}), MetricError);
  CHECK_THROWS_AS(nmae(std::vector<double>{}, std::vector<double>{}), MetricError);
  CHECK_THROWS_AS(nmae(std::vector<double>{1}, std::vector<double>{1, 2}), DimensionError);
}

TEST_CASE("nrmse examples") {
  const std::vector<double> x{1.0, -2.0, 3.5};
  CHECK(nrmse(x, x) == 0.0);
  CHECK(nrmse(std::vector<double>{3}, std::vector<double>{0}) == 1.0);
  CHECK(std::abs(nrmse(std::vector<double>{1, 2}, std::vector<double>{0, 0}) -
                 std::sqrt(2.5) / 1.5) <= 1e-15);
  CHECK_THROWS_AS(nrmse(std::vector<double>{0}, std::vector<double>{1}), MetricError);
  CHECK_THROWS_AS(nrmse(std::vector<double>{1}, std::vector<double>{1, 2}), DimensionError);
}

TEST_CASE("metrics are scale invariant") {
  std::mt19937_64 e(3);
  std::normal_distribution<double> nd(0.0, 5.0);
  std::vector<double> a(200), p(200);
  for (std::size_t i = 0; i < 200; ++i) {
    a[i] = nd(e);
    p[i] = a[i] + 0.3 * nd(e);
  }
  const double m0 = nmae(a, p), r0 = nrmse(a, p);
  CHECK(m0 >= 0.0);
  CHECK(r0 >= 0.0);
  for (double c : {0.01, 1.0, 1000.0, 3.7e-5}) {
    std::vector<double> ca(a), cp(p);
    for (double& v : ca) v *= c;
    for (double& v : cp) v *= c;
    CHECK(std::abs(nmae(ca, cp) - m0) <= 1e-12 * m0);
    CHECK(std::abs(nrmse(ca, cp) - r0) <= 1e-12 * r0);
  }
}

TEST_CASE("report formatting") {
  MetricReport r;
  r.dataset = "d.csv";
  r.checkpoint = "m.ckpt";
  r.lookback = 96;
  r.rows = {{96, 0.5, 0.75, 10}, {720, 0.125, 0.25, 2}};
  CHECK(r.to_csv() == "horizon,nmae,nrmse,windows\n96,0.5000000000,0.7500000000,10\n"
                      "720,0.1250000000,0.2500000000,2\n");
  const std::string table = r.to_table();
  CHECK(table.find("d.csv") != std::string::npos);
  CHECK(table.find("lookback: 96") != std::string::npos);
  CHECK(table.find("0.125000") != std::string::npos);
}

TEST_CASE("varied-horizon evaluation") {
  const ModelState m = small_model(1);
  const SplitData d = small_data();
  const std::vector<std::size_t> one{16};
  const MetricReport single = varied_horizon_eval(m, d.test, 32, one, d.scaler);
  REQUIRE(single.rows.size() == 1);
  CHECK(single.rows[0].horizon == 16);
  CHECK(single.rows[0].windows == 3 * ((400 - 32) / 16));
  CHECK(single.lookback == 32);

  const std::vector<std::size_t> hs{8, 24, 100, 300};
  const MetricReport a = varied_horizon_eval(m, d.test, 32, hs, d.scaler);
  const MetricReport b = varied_horizon_eval(m, d.test, 32, hs, d.scaler);
  REQUIRE(a.rows.size() == 4);
  CHECK(a.to_csv() == b.to_csv());
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.rows[i].horizon == hs[i]);
    CHECK(std::isfinite(a.rows[i].nmae));
    CHECK(a.rows[i].nrmse >= 0.0);
    CHECK(a.rows[i].nmae == b.rows[i].nmae);
  }
  const std::vector<std::size_t> long_h{400};
  CHECK_THROWS_AS(varied_horizon_eval(m, d.test, 32, long_h, d.scaler), SizingError);
}

TEST_CASE("metrics are computed on the original scale") {
  const ModelState m = small_model(2);
  const SplitData d = small_data();
  const std::vector<Sample> samples = stride_windows(d.test, 32, 20);
  const std::vector<std::vector<double>> preds = predict_samples(m, samples);
  std::vector<double> actual, predicted;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::size_t k = samples[i].variate;
    for (std::size_t t = 0; t < 20; ++t) {
      actual.push_back(samples[i].target[t] * d.scaler.std[k] + d.scaler.mean[k]);
      predicted.push_back(preds[i][t] * d.scaler.std[k] + d.scaler.mean[k]);
    }
  }
  const std::vector<std::size_t> h{20};
  const MetricReport r = varied_horizon_eval(m, d.test, 32, h, d.scaler);
  CHECK(r.rows[0].nmae == doctest::Approx(nmae(actual, predicted)).epsilon(1e-14));
  CHECK(r.rows[0].nrmse == doctest::Approx(nrmse(actual, predicted)).epsilon(1e-14));
}

TEST_CASE("prefix consistency across horizons") {
  const ModelState m = small_model(3);
  const SplitData d = small_data();
  std::vector<Sample> longer = stride_windows(d.test, 32, 200, 37);
  std::vector<Sample> shorter = longer;
  for (Sample& s : shorter) s.window.horizon_len = 50;
  EvalOptions opt;
  opt.batch_size = 7;
  const auto p200 = predict_samples(m, longer, opt);
  const auto p50 = predict_samples(m, shorter, opt);
  for (std::size_t i = 0; i < longer.size(); ++i) {
    REQUIRE(p200[i].size() == 200);
    REQUIRE(p50[i].size() == 50);
    CHECK(bitwise_equal(std::vector<double>(p200[i].begin(), p200[i].begin() + 50), p50[i]));
  }
}

TEST_CASE("threads and batch size do not change predictions") {
  const ModelState m = small_model(4);
  const SplitData d = small_data();
  const std::vector<Sample> samples = stride_windows(d.test, 32, 24, 5);
  EvalOptions base;
  base.batch_size = 64;
  const auto ref = predict_samples(m, samples, base);
  for (std::size_t threads : {2, 3, 8}) {
    for (std::size_t batch : {1, 13, 64}) {
      EvalOptions o;
      o.threads = threads;
      o.batch_size = batch;
      const auto got = predict_samples(m, samples, o);
      REQUIRE(got.size() == ref.size());
      for (std::size_t i = 0; i < got.size(); ++i) CHECK(bitwise_equal(got[i], ref[i]));
    }
  }
}

TEST_CASE("persistence baseline") {
  const SplitData d = small_data();
  const std::vector<std::size_t> hs{12, 48};
  const MetricReport p = persistence_eval(d.test, 32, hs, d.scaler);
  const std::vector<Sample> samples = stride_windows(d.test, 32, 12);
  std::vector<double> actual, predicted;
  for (const Sample& s : samples) {
    const std::size_t k = s.variate;
    for (double v : s.target) {
      actual.push_back(d.scaler.inverse(v, k));
      predicted.push_back(d.scaler.inverse(s.window.context.back(), k));
    }
  }
  CHECK(p.rows[0].nmae == doctest::Approx(nmae(actual, predicted)).epsilon(1e-14));
  CHECK(p.rows[0].windows == samples.size());
  CHECK(p.rows[1].windows == stride_windows(d.test, 32, 48).size());
}
