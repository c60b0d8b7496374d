// SPDX-License-Identifier: Apache-2.0
#include "elastst/backbone.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "elastst/errors.hpp"

namespace elastst {

void AttentionConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || d_ff == 0 || n_layers == 0) {
    throw ParameterError("attention config: d_model, n_heads, d_ff and n_layers must be positive");
  }
  if (head_dim == 0 || head_dim % 2 != 0) {
    throw ParameterError("attention config: head_dim must be even, got " +
                         std::to_string(head_dim));
  }
}

namespace {

Tensor param(Shape shape, double value = 0.0) {
  Tensor t = Tensor::full(std::move(shape), value);
  t.set_requires_grad(true);
  return t;
}

Tensor uniform_param(std::size_t rows, std::size_t cols, rng::Engine& e) {
  Tensor t = Tensor::zeros({rows, cols});
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  for (double& v : t.data()) v = rng::uniform(e, -bound, bound);
  t.set_requires_grad(true);
  return t;
}

}  // namespace

LayerWeights LayerWeights::zeros(const AttentionConfig& cfg) {
  cfg.validate();
  const std::size_t D = cfg.d_model, I = cfg.inner(), F = cfg.d_ff;
  LayerWeights w;
  w.wq = param({D, I});
  w.wk = param({D, I});
  w.wv = param({D, I});
  w.wo = param({I, D});
  w.ln1_gain = param({1, D}, 1.0);
  w.ln1_bias = param({1, D});
  w.ln2_gain = param({1, D}, 1.0);
  w.ln2_bias = param({1, D});
  w.ff_w1 = param({D, F});
  w.ff_b1 = param({1, F});
  w.ff_w2 = param({F, D});
  w.ff_b2 = param({1, D});
  return w;
}

LayerWeights LayerWeights::random(const AttentionConfig& cfg, rng::Engine& e) {
  LayerWeights w = zeros(cfg);
  const std::size_t D = cfg.d_model, I = cfg.inner(), F = cfg.d_ff;
  w.wq = uniform_param(D, I, e);
  w.wk = uniform_param(D, I, e);
  w.wv = uniform_param(D, I, e);
  w.wo = uniform_param(I, D, e);
  w.ff_w1 = uniform_param(D, F, e);
  w.ff_w2 = uniform_param(F, D, e);
  return w;
}

std::vector<std::pair<std::string, Tensor*>> LayerWeights::named() {
  return {{"wq", &wq},           {"wk", &wk},           {"wv", &wv},
          {"wo", &wo},           {"ln1.gain", &ln1_gain}, {"ln1.bias", &ln1_bias},
          {"ln2.gain", &ln2_gain}, {"ln2.bias", &ln2_bias}, {"ff.w1", &ff_w1},
          {"ff.b1", &ff_b1},     {"ff.w2", &ff_w2},     {"ff.b2", &ff_b2}};
}

std::vector<std::pair<std::string, const Tensor*>> LayerWeights::named() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<LayerWeights*>(this)->named()) out.emplace_back(name, t);
  return out;
}

std::vector<std::size_t> SequenceLayout::positions() const {
  std::vector<std::size_t> pos(batch * seq_len);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t m = 0; m < seq_len; ++m) pos[b * seq_len + m] = m;
  return pos;
}

std::vector<std::size_t> SequenceLayout::keys() const {
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < key_mask.size(); ++n)
    if (key_mask[n]) out.push_back(n);
  return out;
}

Tensor attention_core(Graph& g, const Tensor& q, const Tensor& k, const Tensor& v,
                      const SequenceLayout& layout, std::size_t heads, std::size_t head_dim,
                      AttentionProbe* probe) {
  const std::size_t B = layout.batch, N = layout.seq_len, d = head_dim;
  const std::size_t width = heads * d;
  if (layout.key_mask.size() != N) {
    throw DimensionError("attention: key mask has " + std::to_string(layout.key_mask.size()) +
                         " entries for sequences of " + std::to_string(N));
  }
  for (const Tensor* t : {&q, &k, &v}) {
    if (t->rows() != B * N || t->cols() != width) {
      throw DimensionError("attention: expected " + std::to_string(B * N) + "x" +
                           std::to_string(width) + " operand, got " + shape_str(t->shape()));
    }
  }
  auto keys = std::make_shared<const std::vector<std::size_t>>(layout.keys());
  if (keys->empty()) throw ContractError("attention: key mask blocks every key");
  const std::size_t K = keys->size();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  auto probs = std::make_shared<std::vector<double>>(B * heads * N * K);
  Tensor out = Tensor::zeros({B * N, width});
  const double* qv = q.ptr();
  const double* kv = k.ptr();
  const double* vv = v.ptr();
  double* o = out.ptr();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t m = 0; m < N; ++m) {
        const double* qrow = qv + (b * N + m) * width + h * d;
        double* w = probs->data() + ((b * heads + h) * N + m) * K;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < K; ++s) {
          const double* krow = kv + (b * N + (*keys)[s]) * width + h * d;
          double dot = 0.0;
          for (std::size_t i = 0; i < d; ++i) dot += qrow[i] * krow[i];
          w[s] = dot * inv_sqrt_d;
          mx = std::max(mx, w[s]);
        }
        double total = 0.0;
        for (std::size_t s = 0; s < K; ++s) {
          w[s] = std::exp(w[s] - mx);
          total += w[s];
        }
        for (std::size_t s = 0; s < K; ++s) w[s] /= total;
        double* orow = o + (b * N + m) * width + h * d;
        for (std::size_t s = 0; s < K; ++s) {
          const double* vrow = vv + (b * N + (*keys)[s]) * width + h * d;
          for (std::size_t i = 0; i < d; ++i) orow[i] += w[s] * vrow[i];
        }
      }
    }
  }
  if (probe) {
    probe->weights = *probs;
    probe->keys = *keys;
    probe->heads = heads;
    probe->seq_len = N;
  }

  g.record(out, {q, k, v}, [q, k, v, out, probs, keys, B, N, K, heads, d, width,
                            inv_sqrt_d]() mutable {
    const double* go = out.grad().data();
    const double* qv = q.ptr();
    const double* kv = k.ptr();
    const double* vv = v.ptr();
    double* gq = q.requires_grad() ? q.grad().data() : nullptr;
    double* gk = k.requires_grad() ? k.grad().data() : nullptr;
    double* gv = v.requires_grad() ? v.grad().data() : nullptr;
    std::vector<double> ds(K);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t m = 0; m < N; ++m) {
          const std::size_t qoff = (b * N + m) * width + h * d;
          const double* w = probs->data() + ((b * heads + h) * N + m) * K;
          const double* grow = go + qoff;
          double dot = 0.0;
          for (std::size_t s = 0; s < K; ++s) {
            const std::size_t koff = (b * N + (*keys)[s]) * width + h * d;
            double dw = 0.0;
            for (std::size_t i = 0; i < d; ++i) dw += grow[i] * vv[koff + i];
            ds[s] = dw;
            dot += w[s] * dw;
            if (gv)
              for (std::size_t i = 0; i < d; ++i) gv[koff + i] += w[s] * grow[i];
          }
          for (std::size_t s = 0; s < K; ++s) {
            const double score_grad = w[s] * (ds[s] - dot) * inv_sqrt_d;
            const std::size_t koff = (b * N + (*keys)[s]) * width + h * d;
            if (gq)
              for (std::size_t i = 0; i < d; ++i) gq[qoff + i] += score_grad * kv[koff + i];
            if (gk)
              for (std::size_t i = 0; i < d; ++i) gk[koff + i] += score_grad * qv[qoff + i];
          }
        }
      }
    }
  });
  return out;
}

Tensor masked_attention(Graph& g, const Tensor& h, const SequenceLayout& layout,
                        const TunablePeriods& periods, const LayerWeights& w,
                        const AttentionConfig& cfg, AttentionProbe* probe) {
  if (periods.head_dim() != cfg.head_dim) {
    throw DimensionError("masked_attention: periods cover head_dim " +
                         std::to_string(periods.head_dim()) + ", config has " +
                         std::to_string(cfg.head_dim));
  }
  const std::vector<std::size_t> pos = layout.positions();
  Tensor q = apply_rope(g, g.matmul(h, w.wq), pos, periods);
  Tensor k = apply_rope(g, g.matmul(h, w.wk), pos, periods);
  Tensor v = g.matmul(h, w.wv);
  Tensor heads = attention_core(g, q, k, v, layout, cfg.n_heads, cfg.head_dim, probe);
  return g.matmul(heads, w.wo);
}

Tensor transformer_block(Graph& g, const Tensor& h, const SequenceLayout& layout,
                         const TunablePeriods& periods, const LayerWeights& w,
                         const AttentionConfig& cfg) {
  Tensor attn = masked_attention(g, g.layer_norm(h, w.ln1_gain, w.ln1_bias), layout, periods, w, cfg);
  Tensor h1 = g.add(h, attn);
  Tensor ff = g.linear(g.layer_norm(h1, w.ln2_gain, w.ln2_bias), w.ff_w1, w.ff_b1);
  ff = g.linear(g.gelu(ff), w.ff_w2, w.ff_b2);
  return g.add(h1, ff);
}

Tensor run_backbone(Graph& g, Tensor h, const SequenceLayout& layout,
                    const TunablePeriods& periods, const std::vector<LayerWeights>& layers,
                    const AttentionConfig& cfg) {
  for (const LayerWeights& w : layers) h = transformer_block(g, h, layout, periods, w, cfg);
  return h;
}

}  // namespace elastst
