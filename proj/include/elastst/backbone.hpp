// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "elastst/graph.hpp"
#include "elastst/random.hpp"
#include "elastst/tensor.hpp"
#include "elastst/trope.hpp"

namespace elastst {

struct AttentionConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t head_dim = 16;
  std::size_t d_ff = 128;
  std::size_t n_layers = 2;

  std::size_t inner() const { return n_heads * head_dim; }
  void validate() const;
};

// Weights of one pre-norm encoder block. The per-head query/key/value maps
// are stored side by side: columns [h*d, (h+1)*d) belong to head h.
struct LayerWeights {
  Tensor wq, wk, wv;  // d_model x (n_heads * head_dim)
  Tensor wo;          // (n_heads * head_dim) x d_model
  Tensor ln1_gain, ln1_bias;
  Tensor ln2_gain, ln2_bias;
  Tensor ff_w1, ff_b1;  // d_model x d_ff, d_ff
  Tensor ff_w2, ff_b2;  // d_ff x d_model, d_model

  // Projections and feed-forward zero, layer-norm gains one.
  static LayerWeights zeros(const AttentionConfig& cfg);
  // Uniform(+-1/sqrt(fan_in)) matrices, zero biases, unit gains.
  static LayerWeights random(const AttentionConfig& cfg, rng::Engine& rng);

  // Fixed serialization order.
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;
};

// B windows of N patches each, stacked row-wise into a (B*N) x D matrix.
// All windows share one key mask (they come from identical grids).
struct SequenceLayout {
  std::size_t batch = 1;
  std::size_t seq_len = 0;
  std::vector<bool> key_mask;  // true = attendable

  std::vector<std::size_t> positions() const;  // 0..N-1 for every window
  std::vector<std::size_t> keys() const;
};

// Filled by masked_attention when supplied: softmax weights indexed
// [window][head][query][key slot], where key slot k refers to patch keys[k].
struct AttentionProbe {
  std::vector<double> weights;
  std::vector<std::size_t> keys;
  std::size_t heads = 0;
  std::size_t seq_len = 0;

  double weight(std::size_t b, std::size_t h, std::size_t m, std::size_t slot) const {
    return weights[((b * heads + h) * seq_len + m) * keys.size() + slot];
  }
};

// Scaled dot-product attention over pre-projected, pre-rotated q/k/v
// rows. Keys with key_mask false get no weight; every query row attends.
Tensor attention_core(Graph& g, const Tensor& q, const Tensor& k, const Tensor& v,
                      const SequenceLayout& layout, std::size_t heads, std::size_t head_dim,
                      AttentionProbe* probe = nullptr);

// Multi-head masked self-attention with rotary positions. Throws
// ContractError when no key is attendable.
Tensor masked_attention(Graph& g, const Tensor& h, const SequenceLayout& layout,
                        const TunablePeriods& periods, const LayerWeights& w,
                        const AttentionConfig& cfg, AttentionProbe* probe = nullptr);

// H + Attn(LN(H)), then + FFN(LN(.)) with GELU.
Tensor transformer_block(Graph& g, const Tensor& h, const SequenceLayout& layout,
                         const TunablePeriods& periods, const LayerWeights& w,
                         const AttentionConfig& cfg);

Tensor run_backbone(Graph& g, Tensor h, const SequenceLayout& layout,
                    const TunablePeriods& periods, const std::vector<LayerWeights>& layers,
                    const AttentionConfig& cfg);

}  // namespace elastst
