// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "elastst/errors.hpp"
#include "elastst/training.hpp"
#include "test_util.hpp"

using namespace elastst;
using testutil::bitwise_equal;

namespace {

// Direct enumeration: a horizon T covers position tau with weight 1/T.
double enumerated_weight(std::size_t tau, std::size_t t_max) {
  double s = 0.0;
  for (std::size_t T = 1; T <= t_max; ++T)
    if (T >= tau) s += 1.0 / static_cast<double>(T);
  return s / static_cast<double>(t_max);
}

ElasTSTConfig small_config() {
  ElasTSTConfig c;
  c.patch_sizes = {4, 8};
  c.lookback = 24;
  c.attention.d_model = 16;
  c.attention.n_heads = 2;
  c.attention.head_dim = 8;
  c.attention.d_ff = 24;
  c.attention.n_layers = 1;
  c.period_spec.head_dim = 8;
  return c;
}

TrainConfig small_train() {
  TrainConfig t;
  t.t_max = 16;
  t.batches_per_epoch = 3;
  t.batch_size = 4;
  t.epochs = 2;
  t.seed = 11;
  return t;
}

SplitData small_data() {
  return split_and_scale(make_sine_dataset(800, 2, 3), SplitSpec{}, 40);
}

std::vector<double> flat_params(const ModelState& m) {
  std::vector<double> out;
  for (const NamedTensor& p : m.parameters())
    out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

std::string checkpoint_bytes(const Checkpoint& c, const TrainConfig& t) {
  std::ostringstream os;
  write_checkpoint(os, checkpoint_to_file(c, t));
  return os.str();
}

}  // namespace

TEST_CASE("reweight examples") {
  CHECK(reweight(720, 720, ReweightMode::kLogApprox) == 0.0);
  CHECK(reweight(4, 4, ReweightMode::kLogApprox) == 0.0);
  CHECK(reweight(1, 4, ReweightMode::kExactHarmonic) == 25.0 / 48.0);
  CHECK(reweight(4, 4, ReweightMode::kExactHarmonic) == 1.0 / 16.0);
  CHECK(reweight(3, 8, ReweightMode::kFixedUniform) == 1.0 / 8.0);
  CHECK(reweight(1, 10, ReweightMode::kLogApprox) ==
        doctest::Approx(std::log(10.0) / 10.0).epsilon(1e-15));
  CHECK_THROWS_AS(reweight(0, 4, ReweightMode::kExactHarmonic), ParameterError);
  CHECK_THROWS_AS(reweight(5, 4, ReweightMode::kLogApprox), ParameterError);
  CHECK_THROWS_AS(reweight(1, 4, ReweightMode::kSampled), ParameterError);
}

TEST_CASE("exact harmonic matches enumeration") {
  for (std::size_t t_max : {1, 2, 4, 7, 32, 720})
    for (std::size_t tau = 1; tau <= t_max; ++tau)
      CHECK(exact_harmonic_weight(tau, t_max) ==
            doctest::Approx(enumerated_weight(tau, t_max)).epsilon(1e-13));
}

TEST_CASE("log approximation stays within the integral bound") {
  for (std::size_t t_max : {4, 32, 720}) {
    for (std::size_t tau = 1; tau <= t_max; ++tau) {
      const double gap = std::abs(log_approx_weight(tau, t_max) - exact_harmonic_weight(tau, t_max));
      CHECK(gap <= 1.0 / static_cast<double>(tau * t_max));
    }
  }
}

TEST_CASE("mode names round-trip") {
  for (ReweightMode m : {ReweightMode::kLogApprox, ReweightMode::kExactHarmonic,
                         ReweightMode::kFixedUniform, ReweightMode::kSampled})
    CHECK(parse_reweight_mode(to_string(m)) == m);
  CHECK(parse_reweight_mode("log-approx") == ReweightMode::kLogApprox);
  CHECK_THROWS_AS(parse_reweight_mode("cosine"), ParameterError);
}

TEST_CASE("horizon weights per mode") {
  rng::Engine e = rng::make_engine({1});
  const std::vector<double> h = horizon_weights(ReweightMode::kExactHarmonic, 4, e);
  REQUIRE(h.size() == 4);
  CHECK(h[0] == 25.0 / 48.0);
  CHECK(h[3] == 1.0 / 16.0);
  for (ReweightMode m : {ReweightMode::kExactHarmonic, ReweightMode::kLogApprox,
                         ReweightMode::kFixedUniform}) {
    const std::vector<double> all = horizon_weights(m, 720, e);
    for (std::size_t tau = 1; tau <= 720; ++tau) CHECK(all[tau - 1] == reweight(tau, 720, m));
  }
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<double> s = horizon_weights(ReweightMode::kSampled, 10, e);
    REQUIRE(s.size() == 10);
    // A prefix of 1/T_s, zeros after.
    std::size_t Ts = 0;
    while (Ts < 10 && s[Ts] > 0.0) ++Ts;
    REQUIRE(Ts >= 1);
    for (std::size_t t = 0; t < 10; ++t)
      CHECK(s[t] == (t < Ts ? 1.0 / static_cast<double>(Ts) : 0.0));
  }
}

TEST_CASE("monte carlo oracle") {
  CHECK(expected_weight_oracle(1, 1, 1, 3).mean == 1.0);
  CHECK(expected_weight_oracle(1, 1, 1000, 4).mean == 1.0);
  CHECK_THROWS_AS(expected_weight_oracle(1, 4, 0, 0), ParameterError);
  const MonteCarloEstimate a = expected_weight_oracle(3, 32, 1000, 9);
  const MonteCarloEstimate b = expected_weight_oracle(3, 32, 1000, 9);
  CHECK(a.mean == b.mean);
  CHECK(a.std_error == b.std_error);
  for (auto [tau, t_max] : {std::pair<std::size_t, std::size_t>{1, 4}, {360, 720}}) {
    const MonteCarloEstimate m = expected_weight_oracle(tau, t_max, 1000000, 17);
    CHECK(m.std_error > 0.0);
    CHECK(std::abs(m.mean - enumerated_weight(tau, t_max)) <= 3.0 * m.std_error);
  }
}

TEST_CASE("adam steps") {
  AdamConfig cfg;
  cfg.lr = 0.01;
  {
    std::vector<double> p{1.5, -2.0};
    AdamMoments mom{{0.4, -0.2}, {0.09, 0.01}};
    const std::vector<double> zero(2, 0.0);
    adam_step(p, zero, mom, cfg, 1);
    // The step itself moves p by the decayed moment; with zero moments it stays put.
    AdamMoments fresh{{0.0, 0.0}, {0.0, 0.0}};
    std::vector<double> q{1.5, -2.0};
    adam_step(q, zero, fresh, cfg, 1);
    CHECK(q == std::vector<double>{1.5, -2.0});
    CHECK(mom.m[0] == doctest::Approx(0.9 * 0.4).epsilon(1e-15));
    CHECK(mom.v[0] == doctest::Approx(0.999 * 0.09).epsilon(1e-15));
  }
  {
    std::vector<double> p{3.0};
    AdamMoments mom{{0.0}, {0.0}};
    const std::vector<double> g{1.0};
    adam_step(p, g, mom, cfg, 1);
    CHECK(p[0] - 3.0 == doctest::Approx(-cfg.lr).epsilon(1e-6));
  }
  {
    auto run = [&] {
      std::vector<double> p{0.3, -0.7, 1.1};
      AdamMoments mom{{0, 0, 0}, {0, 0, 0}};
      for (std::size_t s = 1; s <= 25; ++s) {
        std::vector<double> g{p[0] * p[0], std::sin(p[1]), p[2] - 0.5};
        adam_step(p, g, mom, cfg, s);
      }
      return p;
    };
    CHECK(bitwise_equal(run(), run()));
  }
  std::vector<double> p{1.0, 2.0};
  AdamMoments mom{{0, 0}, {0, 0}};
  const std::vector<double> g1{1.0};
  CHECK_THROWS_AS(adam_step(p, g1, mom, cfg, 1), DimensionError);
}

TEST_CASE("train config validation") {
  TrainConfig t;
  CHECK_NOTHROW(t.validate());
  t.t_max = 0;
  CHECK_THROWS_AS(t.validate(), ParameterError);
  t = TrainConfig{};
  t.learning_rate = 0.0;
  CHECK_THROWS_AS(t.validate(), ParameterError);
}

TEST_CASE("zero epochs returns the initial model") {
  const ModelState init = ModelState::init(small_config(), 2);
  TrainConfig t = small_train();
  t.epochs = 0;
  const TrainResult r = train(init, small_data(), t);
  CHECK(r.log.empty());
  CHECK(bitwise_equal(flat_params(r.best.model), flat_params(init)));
  CHECK(bitwise_equal(flat_params(r.last.model), flat_params(init)));
}

TEST_CASE("too little data is a sizing error naming the requirement") {
  const ModelState init = ModelState::init(small_config(), 2);
  TrainConfig t = small_train();
  t.t_max = 200;
  try {
    train(init, small_data(), t);
    FAIL("expected SizingError");
  } catch (const SizingError& e) {
    CHECK(std::string(e.what()).find("224") != std::string::npos);
  }
}

TEST_CASE("training is reproducible and resumable") {
  const ModelState init = ModelState::init(small_config(), 4);
  const SplitData data = small_data();
  const TrainConfig t = small_train();
  const TrainResult a = train(init, data, t);
  const TrainResult b = train(init, data, t);
  REQUIRE(a.log.size() == 2);
  CHECK(checkpoint_bytes(a.best, t) == checkpoint_bytes(b.best, t));
  CHECK(checkpoint_bytes(a.last, t) == checkpoint_bytes(b.last, t));
  CHECK_FALSE(bitwise_equal(flat_params(a.last.model), flat_params(init)));

  TrainConfig first = t;
  first.epochs = 1;
  const TrainResult half = train(init, data, first);
  const TrainResult resumed = train(init, data, t, &half.last);
  CHECK(bitwise_equal(flat_params(resumed.last.model), flat_params(a.last.model)));
  CHECK(checkpoint_bytes(resumed.last, t) == checkpoint_bytes(a.last, t));
  REQUIRE(resumed.log.size() == 1);
  CHECK(resumed.log[0].epoch == 2);
  CHECK(resumed.log[0].val_nmae == a.log[1].val_nmae);
}

TEST_CASE("checkpoint round-trip") {
  const ModelState init = ModelState::init(small_config(), 6);
  const TrainConfig t = small_train();
  TrainConfig one = t;
  one.epochs = 1;
  const TrainResult r = train(init, small_data(), one);
  const std::string bytes = checkpoint_bytes(r.last, t);
  std::istringstream is(bytes);
  const Checkpoint back = checkpoint_from_file(read_checkpoint(is));
  CHECK(back.epoch == 1);
  CHECK(back.best_val_nmae == r.last.best_val_nmae);
  CHECK(back.optimizer.step == r.last.optimizer.step);
  CHECK(bitwise_equal(flat_params(back.model), flat_params(r.last.model)));
  CHECK(checkpoint_bytes(back, t) == bytes);
}

TEST_CASE("fixed-uniform training equals plain MSE training") {
  const ElasTSTConfig mc = small_config();
  const ModelState init = ModelState::init(mc, 8);
  const SplitData data = small_data();
  TrainConfig t = small_train();
  t.epochs = 1;
  t.reweight_mode = ReweightMode::kFixedUniform;
  const TrainResult r = train(init, data, t);

  // Reference loop: mean squared error on the normalized scale, averaged
  // over the assembled forecast and every branch.
  ModelState ref = init.clone();
  AdamState opt;
  AdamConfig adam;
  adam.lr = t.learning_rate;
  const std::vector<NamedTensor> params = ref.parameters();
  for (std::size_t b = 0; b < t.batches_per_epoch; ++b) {
    rng::Engine e = rng::make_engine({t.seed, 0, b});
    const std::vector<Sample> samples = sample_windows(data.train, mc.lookback, t.t_max, t.batch_size, e);
    std::vector<Window> windows;
    std::vector<double> z;
    for (const Sample& s : samples) windows.push_back(s.window);
    Graph g;
    const Forecast f = forward(ref, g, windows);
    for (std::size_t i = 0; i < samples.size(); ++i)
      for (double v : samples[i].target) z.push_back((v - f.stats[i].mean) / f.stats[i].scale);
    const Tensor target = Tensor::from({samples.size(), t.t_max}, z);
    std::vector<Tensor> outputs = f.per_size;
    outputs.push_back(f.assembled);
    Tensor total;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      const Tensor d = g.sub(outputs[i], target);
      const Tensor m = g.mean(g.mul(d, d));
      total = i == 0 ? m : g.add(total, m);
    }
    const Tensor loss = g.scale(total, 1.0 / static_cast<double>(outputs.size()));
    for (const NamedTensor& p : params) {
      Tensor x = p.tensor;
      x.zero_grad();
    }
    g.backward(loss);
    opt.step_all(params, adam);
  }
  const std::vector<double> got = flat_params(r.last.model), want = flat_params(ref);
  REQUIRE(got.size() == want.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
  CHECK(worst < 1e-10);
}

TEST_CASE("training log csv") {
  std::vector<EpochLog> log(2);
  log[0] = {1, 0.5, 0.25, 0.125, 1.5};
  log[1] = {2, 0.25, 0.2, 0.1, 1.25};
  const std::string csv = training_log_csv(log);
  CHECK(csv.rfind("epoch,train_loss,val_nmae,val_nrmse,wall_seconds\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
