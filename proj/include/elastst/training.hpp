// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elastst/checkpoint.hpp"
#include "elastst/data_io.hpp"
#include "elastst/model.hpp"
#include "elastst/random.hpp"

namespace elastst {

enum class ReweightMode { kLogApprox, kExactHarmonic, kFixedUniform, kSampled };

ReweightMode parse_reweight_mode(const std::string& s);
std::string to_string(ReweightMode mode);

// (ln t_max - ln tau) / t_max
double log_approx_weight(std::size_t tau, std::size_t t_max);
// (sum_{T=tau}^{t_max} 1/T) / t_max: the expected weight of position tau
// when the horizon is drawn uniformly from [1, t_max].
double exact_harmonic_weight(std::size_t tau, std::size_t t_max);

// Weight of position tau (1-based) under a deterministic mode. kSampled has
// no fixed weight and throws ParameterError; use horizon_weights.
double reweight(std::size_t tau, std::size_t t_max, ReweightMode mode);

// Weights for positions 1..t_max. kSampled draws T_s uniformly from
// [1, t_max] and puts 1/T_s on the first T_s positions.
std::vector<double> horizon_weights(ReweightMode mode, std::size_t t_max, rng::Engine& rng);

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;  // sample std / sqrt(n)
};

// Mean of (1/T_s if T_s >= tau else 0) over n draws of T_s ~ U{1..t_max}.
MonteCarloEstimate expected_weight_oracle(std::size_t tau, std::size_t t_max,
                                          std::size_t n_samples, std::uint64_t seed);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

// One bias-corrected Adam update; step_count is the 1-based step index.
void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& moments,
               const AdamConfig& config, std::size_t step_count);

// Adam over a fixed list of tensors (moments aligned by position).
struct AdamState {
  std::size_t step = 0;
  std::vector<AdamMoments> moments;

  void step_all(const std::vector<NamedTensor>& params, const AdamConfig& config);
};

struct TrainConfig {
  std::size_t t_max = 720;
  ReweightMode reweight_mode = ReweightMode::kLogApprox;
  double learning_rate = 1e-3;
  std::size_t batches_per_epoch = 100;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Checkpoint {
  ModelState model;
  AdamState optimizer;
  std::size_t epoch = 0;  // completed epochs
  double best_val_nmae = std::numeric_limits<double>::infinity();
};

CheckpointFile checkpoint_to_file(const Checkpoint& ckpt, const TrainConfig& config);
Checkpoint checkpoint_from_file(const CheckpointFile& file);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt,
                     const TrainConfig& config);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_nmae = 0.0;
  double val_nrmse = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  Checkpoint best;  // lowest validation NMAE seen
  Checkpoint last;  // state after the final epoch, for resuming
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Horizon-reweighted training with Adam. Every batch draws its windows from
// an RNG keyed by (seed, epoch, batch), so resuming from `resume` replays
// the same trajectory as an uninterrupted run.
TrainResult train(const ModelState& init, const SplitData& data, const TrainConfig& config,
                  const Checkpoint* resume = nullptr, const EpochCallback& on_epoch = {});

// epoch,train_loss,val_nmae,val_nrmse,wall_seconds
std::string training_log_csv(std::span<const EpochLog> log);

}  // namespace elastst
