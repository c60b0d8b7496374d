// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "elastst/backbone.hpp"
#include "elastst/graph.hpp"
#include "elastst/patching.hpp"
#include "elastst/tensor.hpp"
#include "elastst/trope.hpp"

namespace elastst {

struct ElasTSTConfig {
  std::vector<std::size_t> patch_sizes{8, 16, 32};  // ascending, distinct
  PeriodSpec period_spec;                            // head_dim mirrors attention.head_dim
  AttentionConfig attention;
  std::size_t lookback = 96;
  bool instance_norm = true;
  double norm_eps = 1e-5;

  void validate() const;
};

// Encoder p -> D -> D and decoder D -> D -> p, one GELU hidden layer each.
struct PatchCodec {
  std::size_t patch_size = 0;
  Tensor enc_w1, enc_b1, enc_w2, enc_b2;
  Tensor dec_w1, dec_b1, dec_w2, dec_b2;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct ModelState {
  ElasTSTConfig config;
  std::vector<PatchCodec> codecs;     // one per patch size, ascending
  std::vector<LayerWeights> layers;   // shared by all patch sizes
  TunablePeriods periods;             // shared by all layers and heads

  static ModelState init(const ElasTSTConfig& config, std::uint64_t seed);

  // Handles to every trainable tensor in serialization order: per patch
  // size ascending (encoder, then decoder), backbone layers by depth,
  // periods last.
  std::vector<NamedTensor> parameters() const;
  std::size_t parameter_count() const;

  // Deep copy; shares no storage with *this.
  ModelState clone() const;
};

// Per-window instance normalization constants: x_norm = (x - mean) / scale.
struct InstanceStats {
  double mean = 0.0;
  double scale = 1.0;
};

// Batched forecast on the normalized scale. per_size[i] and assembled are
// B x T tensors; stats carry what is needed to return to input scale.
struct Forecast {
  std::vector<Tensor> per_size;
  Tensor assembled;
  std::vector<InstanceStats> stats;

  std::size_t batch() const { return assembled.rows(); }
  std::size_t horizon() const { return assembled.cols(); }
  // Assembled forecast of window b on the input scale.
  std::vector<double> values(std::size_t b) const;
  std::vector<double> branch_values(std::size_t branch, std::size_t b) const;
};

struct ForwardOptions {
  // When false, placeholder keys are attendable (the unmasked ablation).
  bool mask_placeholders = true;
};

// All windows must share one context length and one horizon.
Forecast forward(const ModelState& state, Graph& g, std::span<const Window> windows,
                 ForwardOptions options = {});
// Single window, no gradient recording.
Forecast forward(const ModelState& state, const Window& w, ForwardOptions options = {});

// (sum_i wMSE(branch_i) + wMSE(assembled)) / (S + 1), wMSE = sum_t w_t e_t^2,
// averaged over the windows of the batch. Targets are on the input scale and
// are normalized with the forecast's instance statistics.
Tensor composite_loss(Graph& g, const Forecast& f, std::span<const std::vector<double>> targets,
                      std::span<const double> weights);

// key=value echo of the model configuration (checkpoint header).
std::map<std::string, std::string> model_config_entries(const ElasTSTConfig& config);
ElasTSTConfig model_config_from_entries(const std::map<std::string, std::string>& entries);

}  // namespace elastst
