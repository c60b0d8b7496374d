// SPDX-License-Identifier: Apache-2.0
#include "elastst/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "elastst/errors.hpp"
#include "elastst/eval.hpp"

namespace elastst {

ReweightMode parse_reweight_mode(const std::string& s) {
  if (s == "log-approx") return ReweightMode::kLogApprox;
  if (s == "exact-harmonic") return ReweightMode::kExactHarmonic;
  if (s == "fixed-uniform") return ReweightMode::kFixedUniform;
  if (s == "sampled") return ReweightMode::kSampled;
  throw ParameterError("unknown reweight mode '" + s +
                       "' (expected log-approx, exact-harmonic, fixed-uniform or sampled)");
}

std::string to_string(ReweightMode mode) {
  switch (mode) {
    case ReweightMode::kLogApprox:
      return "log-approx";
    case ReweightMode::kExactHarmonic:
      return "exact-harmonic";
    case ReweightMode::kFixedUniform:
      return "fixed-uniform";
    case ReweightMode::kSampled:
      return "sampled";
  }
  return "log-approx";
}

namespace {

// Sum of 1/T in double-double, so the weight is the correctly rounded
// quotient (25/48 at t_max = 4 comes out exact).
struct HarmonicTail {
  double hi = 0.0, lo = 0.0;
  void add(std::size_t T) {
    const double t = static_cast<double>(T);
    const double q = 1.0 / t;
    const double q_err = std::fma(-q, t, 1.0) / t;
    const double s = hi + q;
    const double bb = s - hi;
    lo += ((hi - (s - bb)) + (q - bb)) + q_err;
    hi = s;
  }
  double divided_by(std::size_t t_max) const {
    const double n = static_cast<double>(t_max);
    const double sum = hi + lo;
    const double sum_err = lo - (sum - hi);
    const double quot = sum / n;
    return quot + (std::fma(-quot, n, sum) + sum_err) / n;
  }
};

void require_position(std::size_t tau, std::size_t t_max) {
  if (t_max == 0 || tau == 0 || tau > t_max) {
    throw ParameterError("reweight: position " + std::to_string(tau) + " outside [1, " +
                         std::to_string(t_max) + "]");
  }
}

}  // namespace

double log_approx_weight(std::size_t tau, std::size_t t_max) {
  require_position(tau, t_max);
  if (tau == t_max) return 0.0;
  return (std::log(static_cast<double>(t_max)) - std::log(static_cast<double>(tau))) /
         static_cast<double>(t_max);
}

double exact_harmonic_weight(std::size_t tau, std::size_t t_max) {
  require_position(tau, t_max);
  HarmonicTail acc;
  for (std::size_t T = t_max; T >= tau; --T) acc.add(T);
  return acc.divided_by(t_max);
}

double reweight(std::size_t tau, std::size_t t_max, ReweightMode mode) {
  switch (mode) {
    case ReweightMode::kLogApprox:
      return log_approx_weight(tau, t_max);
    case ReweightMode::kExactHarmonic:
      return exact_harmonic_weight(tau, t_max);
    case ReweightMode::kFixedUniform:
      require_position(tau, t_max);
      return 1.0 / static_cast<double>(t_max);
    case ReweightMode::kSampled:
      break;
  }
  throw ParameterError("reweight: sampled mode has no fixed per-position weight");
}

std::vector<double> horizon_weights(ReweightMode mode, std::size_t t_max, rng::Engine& e) {
  if (t_max == 0) throw ParameterError("horizon_weights: t_max must be positive");
  std::vector<double> w(t_max, 0.0);
  if (mode == ReweightMode::kSampled) {
    const std::size_t ts = 1 + rng::uniform_index(e, t_max);
    for (std::size_t tau = 0; tau < ts; ++tau) w[tau] = 1.0 / static_cast<double>(ts);
    return w;
  }
  if (mode == ReweightMode::kExactHarmonic) {
    // Suffix sum of 1/T, built from the tail.
    HarmonicTail acc;
    for (std::size_t tau = t_max; tau >= 1; --tau) {
      acc.add(tau);
      w[tau - 1] = acc.divided_by(t_max);
    }
    return w;
  }
  for (std::size_t tau = 1; tau <= t_max; ++tau) w[tau - 1] = reweight(tau, t_max, mode);
  return w;
}

MonteCarloEstimate expected_weight_oracle(std::size_t tau, std::size_t t_max,
                                          std::size_t n_samples, std::uint64_t seed) {
  require_position(tau, t_max);
  if (n_samples == 0) throw ParameterError("expected_weight_oracle: n_samples must be >= 1");
  rng::Engine e = rng::make_engine({seed, 0x6f7261636cULL});
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const std::size_t ts = 1 + rng::uniform_index(e, t_max);
    const double w = ts >= tau ? 1.0 / static_cast<double>(ts) : 0.0;
    sum += w;
    sum_sq += w * w;
  }
  const double n = static_cast<double>(n_samples);
  MonteCarloEstimate est;
  est.mean = sum / n;
  const double var = n > 1 ? std::max(0.0, (sum_sq - n * est.mean * est.mean) / (n - 1)) : 0.0;
  est.std_error = std::sqrt(var / n);
  return est;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& mom,
               const AdamConfig& c, std::size_t step_count) {
  if (grads.size() != params.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " params vs " +
                         std::to_string(grads.size()) + " grads");
  }
  if (mom.m.empty() && mom.v.empty()) {
    mom.m.assign(params.size(), 0.0);
    mom.v.assign(params.size(), 0.0);
  }
  if (mom.m.size() != params.size() || mom.v.size() != params.size()) {
    throw DimensionError("adam_step: moment buffers do not match parameter count");
  }
  if (step_count == 0) throw ParameterError("adam_step: step_count is 1-based");
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step_count));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    mom.m[i] = c.beta1 * mom.m[i] + (1.0 - c.beta1) * g;
    mom.v[i] = c.beta2 * mom.v[i] + (1.0 - c.beta2) * g * g;
    const double m_hat = mom.m[i] / bc1;
    const double v_hat = mom.v[i] / bc2;
    params[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
  }
}

void AdamState::step_all(const std::vector<NamedTensor>& params, const AdamConfig& config) {
  if (moments.empty()) moments.resize(params.size());
  if (moments.size() != params.size()) {
    throw DimensionError("adam: optimizer tracks " + std::to_string(moments.size()) +
                         " tensors, got " + std::to_string(params.size()));
  }
  ++step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].tensor;
    adam_step(t.data(), t.grad(), moments[i], config, step);
  }
}

void TrainConfig::validate() const {
  if (t_max == 0) throw ParameterError("train: t_max must be >= 1");
  if (!(learning_rate > 0.0)) throw ParameterError("train: learning rate must be positive");
  if (batch_size == 0) throw ParameterError("train: batch_size must be >= 1");
}

CheckpointFile checkpoint_to_file(const Checkpoint& ckpt, const TrainConfig& config) {
  CheckpointFile file = make_model_checkpoint(ckpt.model);
  file.entries["train.epoch"] = std::to_string(ckpt.epoch);
  file.entries["train.best_val_nmae"] = format_double(ckpt.best_val_nmae);
  file.entries["train.adam_step"] = std::to_string(ckpt.optimizer.step);
  file.entries["train.t_max"] = std::to_string(config.t_max);
  file.entries["train.reweight_mode"] = to_string(config.reweight_mode);
  file.entries["train.lr"] = format_double(config.learning_rate);
  file.entries["train.batches_per_epoch"] = std::to_string(config.batches_per_epoch);
  file.entries["train.batch_size"] = std::to_string(config.batch_size);
  file.entries["train.epochs"] = std::to_string(config.epochs);
  file.entries["train.seed"] = std::to_string(config.seed);
  const std::vector<NamedTensor> params = ckpt.model.parameters();
  for (const char* which : {"m", "v"}) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor buf = Tensor::zeros(params[i].tensor.shape());
      if (i < ckpt.optimizer.moments.size()) {
        const auto& src = which[0] == 'm' ? ckpt.optimizer.moments[i].m : ckpt.optimizer.moments[i].v;
        if (!src.empty()) std::copy(src.begin(), src.end(), buf.data().begin());
      }
      file.tensors.push_back({std::string("adam.") + which + "." + params[i].name, buf});
    }
  }
  return file;
}

Checkpoint checkpoint_from_file(const CheckpointFile& file) {
  Checkpoint ckpt;
  ckpt.model = model_from_checkpoint(file);
  auto get = [&](const char* key) -> std::string {
    auto it = file.entries.find(key);
    return it == file.entries.end() ? std::string() : it->second;
  };
  if (const std::string e = get("train.epoch"); !e.empty()) ckpt.epoch = std::stoull(e);
  if (const std::string b = get("train.best_val_nmae"); !b.empty())
    ckpt.best_val_nmae = parse_double(b, "train.best_val_nmae");
  if (const std::string s = get("train.adam_step"); !s.empty()) ckpt.optimizer.step = std::stoull(s);

  std::map<std::string, const Tensor*> by_name;
  for (const NamedTensor& t : file.tensors) by_name[t.name] = &t.tensor;
  const std::vector<NamedTensor> params = ckpt.model.parameters();
  if (ckpt.optimizer.step > 0) {
    ckpt.optimizer.moments.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto m = by_name.find("adam.m." + params[i].name);
      auto v = by_name.find("adam.v." + params[i].name);
      if (m == by_name.end() || v == by_name.end()) {
        throw IngestionError("checkpoint: missing optimizer moments for " + params[i].name);
      }
      ckpt.optimizer.moments[i].m.assign(m->second->data().begin(), m->second->data().end());
      ckpt.optimizer.moments[i].v.assign(v->second->data().begin(), v->second->data().end());
    }
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt,
                     const TrainConfig& config) {
  save_checkpoint_file(path, checkpoint_to_file(ckpt, config));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_file(load_checkpoint_file(path));
}

namespace {

Checkpoint snapshot(const ModelState& model, const AdamState& opt, std::size_t epoch,
                    double best) {
  return Checkpoint{model.clone(), opt, epoch, best};
}

}  // namespace

TrainResult train(const ModelState& init, const SplitData& data, const TrainConfig& config,
                  const Checkpoint* resume, const EpochCallback& on_epoch) {
  config.validate();
  const std::size_t L = init.config.lookback;
  const std::size_t required = L + config.t_max;
  for (const Split* s : {&data.train, &data.val}) {
    if (s->length < required) {
      throw SizingError("training needs splits of at least " + std::to_string(required) +
                        " rows (lookback " + std::to_string(L) + " + t_max " +
                        std::to_string(config.t_max) + "), got " + std::to_string(s->length));
    }
  }

  ModelState state = resume ? resume->model.clone() : init.clone();
  AdamState opt = resume ? resume->optimizer : AdamState{};
  const std::size_t start = resume ? resume->epoch : 0;
  double best_val = resume ? resume->best_val_nmae : std::numeric_limits<double>::infinity();

  TrainResult result;
  result.best = snapshot(state, opt, start, best_val);

  AdamConfig adam;
  adam.lr = config.learning_rate;
  const std::size_t horizons[] = {config.t_max};
  const std::vector<NamedTensor> params = state.parameters();

  for (std::size_t epoch = start; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < config.batches_per_epoch; ++b) {
      rng::Engine e = rng::make_engine({config.seed, epoch, b});
      const std::vector<Sample> samples =
          sample_windows(data.train, L, config.t_max, config.batch_size, e);
      const std::vector<double> weights = horizon_weights(config.reweight_mode, config.t_max, e);
      std::vector<Window> windows;
      std::vector<std::vector<double>> targets;
      windows.reserve(samples.size());
      targets.reserve(samples.size());
      for (const Sample& s : samples) {
        windows.push_back(s.window);
        targets.push_back(s.target);
      }
      Graph g;
      const Forecast f = forward(state, g, windows);
      const Tensor loss = composite_loss(g, f, targets, weights);
      for (const NamedTensor& p : params) {
        Tensor t = p.tensor;
        t.zero_grad();
      }
      g.backward(loss);
      opt.step_all(params, adam);
      loss_sum += loss.item();
      if (!std::isfinite(loss.item())) {
        throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " + std::to_string(b));
      }
    }
    const MetricReport val = varied_horizon_eval(state, data.val, L, horizons, data.scaler);
    EpochLog row;
    row.epoch = epoch + 1;
    row.train_loss = config.batches_per_epoch ? loss_sum / static_cast<double>(config.batches_per_epoch) : 0.0;
    row.val_nmae = val.rows.front().nmae;
    row.val_nrmse = val.rows.front().nrmse;
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (row.val_nmae < best_val) {
      best_val = row.val_nmae;
      result.best = snapshot(state, opt, epoch + 1, best_val);
    }
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  result.last = snapshot(state, opt, std::max(start, config.epochs), best_val);
  result.best.best_val_nmae = best_val;
  return result;
}

std::string training_log_csv(std::span<const EpochLog> log) {
  std::ostringstream os;
  os << "epoch,train_loss,val_nmae,val_nrmse,wall_seconds\n";
  char buf[128];
  for (const EpochLog& r : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.10f,%.10f,%.10f,%.3f\n", r.epoch, r.train_loss,
                  r.val_nmae, r.val_nrmse, r.wall_seconds);
    os << buf;
  }
  return os.str();
}

}  // namespace elastst
