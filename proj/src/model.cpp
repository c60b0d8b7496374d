// SPDX-License-Identifier: Apache-2.0
#include "elastst/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "elastst/checkpoint.hpp"
#include "elastst/errors.hpp"
#include "elastst/random.hpp"

namespace elastst {

void ElasTSTConfig::validate() const {
  if (patch_sizes.empty()) throw ParameterError("model config: at least one patch size needed");
  for (std::size_t i = 0; i < patch_sizes.size(); ++i) {
    if (patch_sizes[i] == 0) throw ParameterError("model config: patch sizes must be positive");
    if (i > 0 && patch_sizes[i] <= patch_sizes[i - 1]) {
      throw ParameterError("model config: patch sizes must be distinct and ascending");
    }
  }
  if (lookback == 0) throw ParameterError("model config: lookback must be positive");
  attention.validate();
  period_spec.validate();
  if (period_spec.head_dim != attention.head_dim) {
    throw ParameterError("model config: period head_dim " + std::to_string(period_spec.head_dim) +
                         " differs from attention head_dim " +
                         std::to_string(attention.head_dim));
  }
  if (!(norm_eps > 0.0)) throw ParameterError("model config: norm_eps must be positive");
}

namespace {

Tensor uniform_param(std::size_t rows, std::size_t cols, rng::Engine& e) {
  Tensor t = Tensor::zeros({rows, cols});
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  for (double& v : t.data()) v = rng::uniform(e, -bound, bound);
  t.set_requires_grad(true);
  return t;
}

Tensor zero_param(std::size_t rows, std::size_t cols) {
  Tensor t = Tensor::zeros({rows, cols});
  t.set_requires_grad(true);
  return t;
}

Tensor mlp(Graph& g, const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
           const Tensor& b2) {
  return g.linear(g.gelu(g.linear(x, w1, b1)), w2, b2);
}

std::vector<NamedTensor> codec_tensors(const PatchCodec& c) {
  const std::string p = "patch" + std::to_string(c.patch_size) + ".";
  return {{p + "enc.w1", c.enc_w1}, {p + "enc.b1", c.enc_b1}, {p + "enc.w2", c.enc_w2},
          {p + "enc.b2", c.enc_b2}, {p + "dec.w1", c.dec_w1}, {p + "dec.b1", c.dec_b1},
          {p + "dec.w2", c.dec_w2}, {p + "dec.b2", c.dec_b2}};
}

}  // namespace

ModelState ModelState::init(const ElasTSTConfig& config, std::uint64_t seed) {
  config.validate();
  ModelState s;
  s.config = config;
  rng::Engine e = rng::make_engine({seed, 0x656c6173ULL});
  const std::size_t D = config.attention.d_model;
  for (std::size_t p : config.patch_sizes) {
    PatchCodec c;
    c.patch_size = p;
    c.enc_w1 = uniform_param(p, D, e);
    c.enc_b1 = zero_param(1, D);
    c.enc_w2 = uniform_param(D, D, e);
    c.enc_b2 = zero_param(1, D);
    c.dec_w1 = uniform_param(D, D, e);
    c.dec_b1 = zero_param(1, D);
    c.dec_w2 = uniform_param(D, p, e);
    c.dec_b2 = zero_param(1, p);
    s.codecs.push_back(std::move(c));
  }
  for (std::size_t l = 0; l < config.attention.n_layers; ++l)
    s.layers.push_back(LayerWeights::random(config.attention, e));
  s.periods = init_periods(config.period_spec);
  return s;
}

std::vector<NamedTensor> ModelState::parameters() const {
  std::vector<NamedTensor> out;
  for (const PatchCodec& c : codecs)
    for (NamedTensor& t : codec_tensors(c)) out.push_back(std::move(t));
  for (std::size_t l = 0; l < layers.size(); ++l)
    for (const auto& [name, t] : layers[l].named())
      out.push_back({"layer" + std::to_string(l) + "." + name, *t});
  out.push_back({"periods.log", periods.log_periods()});
  return out;
}

std::size_t ModelState::parameter_count() const {
  std::size_t n = 0;
  for (const NamedTensor& t : parameters()) n += t.tensor.numel();
  return n;
}

ModelState ModelState::clone() const {
  ModelState s;
  s.config = config;
  auto copy = [](const Tensor& t) {
    Tensor c = t.clone();
    c.set_requires_grad(true);
    return c;
  };
  for (const PatchCodec& c : codecs) {
    PatchCodec n;
    n.patch_size = c.patch_size;
    n.enc_w1 = copy(c.enc_w1);
    n.enc_b1 = copy(c.enc_b1);
    n.enc_w2 = copy(c.enc_w2);
    n.enc_b2 = copy(c.enc_b2);
    n.dec_w1 = copy(c.dec_w1);
    n.dec_b1 = copy(c.dec_b1);
    n.dec_w2 = copy(c.dec_w2);
    n.dec_b2 = copy(c.dec_b2);
    s.codecs.push_back(std::move(n));
  }
  for (const LayerWeights& w : layers) {
    LayerWeights n = w;
    for (auto& [name, t] : n.named()) *t = copy(*t);
    s.layers.push_back(std::move(n));
  }
  s.periods = periods;
  s.periods.log_periods() = copy(periods.log_periods());
  return s;
}

std::vector<double> Forecast::values(std::size_t b) const {
  const std::size_t T = horizon();
  std::vector<double> out(T);
  for (std::size_t t = 0; t < T; ++t) out[t] = assembled.at(b, t) * stats[b].scale + stats[b].mean;
  return out;
}

std::vector<double> Forecast::branch_values(std::size_t branch, std::size_t b) const {
  const std::size_t T = horizon();
  std::vector<double> out(T);
  for (std::size_t t = 0; t < T; ++t)
    out[t] = per_size[branch].at(b, t) * stats[b].scale + stats[b].mean;
  return out;
}

Forecast forward(const ModelState& state, Graph& g, std::span<const Window> windows,
                 ForwardOptions options) {
  if (windows.empty()) throw ParameterError("forward: no windows");
  const std::size_t L = windows.front().context.size();
  const std::size_t T = windows.front().horizon_len;
  if (L == 0) throw ParameterError("forward: context must hold at least one value");
  if (T == 0) throw ParameterError("forward: horizon must be at least one step");
  for (const Window& w : windows) {
    if (w.context.size() != L || w.horizon_len != T) {
      throw DimensionError("forward: all windows of a batch need the same context and horizon");
    }
  }
  const ElasTSTConfig& cfg = state.config;
  const std::size_t B = windows.size();

  Forecast f;
  f.stats.resize(B);
  std::vector<Window> normalized(B);
  for (std::size_t b = 0; b < B; ++b) {
    const std::vector<double>& x = windows[b].context;
    InstanceStats st;
    if (cfg.instance_norm) {
      double mu = 0.0;
      for (double v : x) mu += v;
      mu /= static_cast<double>(L);
      double var = 0.0;
      for (double v : x) var += (v - mu) * (v - mu);
      var /= static_cast<double>(L);
      st.mean = mu;
      st.scale = std::sqrt(var) + cfg.norm_eps;
    }
    f.stats[b] = st;
    normalized[b].horizon_len = T;
    normalized[b].context.resize(L);
    for (std::size_t t = 0; t < L; ++t) normalized[b].context[t] = (x[t] - st.mean) / st.scale;
  }

  for (const PatchCodec& codec : state.codecs) {
    const std::size_t P = codec.patch_size;
    std::vector<PatchGrid> grids;
    grids.reserve(B);
    for (const Window& w : normalized) grids.push_back(segment(w, P));
    const PatchGrid& g0 = grids.front();
    const std::size_t N = g0.num_patches();
    const std::size_t Nh = g0.horizon_patches;

    std::vector<double> patch_values;
    patch_values.reserve(B * N * P);
    for (const PatchGrid& grid : grids)
      patch_values.insert(patch_values.end(), grid.patches.begin(), grid.patches.end());
    Tensor x = Tensor::from({B * N, P}, std::move(patch_values));

    SequenceLayout layout;
    layout.batch = B;
    layout.seq_len = N;
    layout.key_mask = attention_key_mask(g0);
    if (!options.mask_placeholders) layout.key_mask.assign(N, true);

    Tensor h = mlp(g, x, codec.enc_w1, codec.enc_b1, codec.enc_w2, codec.enc_b2);
    h = run_backbone(g, h, layout, state.periods, state.layers, cfg.attention);

    std::vector<std::size_t> horizon_rows;
    horizon_rows.reserve(B * Nh);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t n = g0.context_patches; n < N; ++n) horizon_rows.push_back(b * N + n);
    Tensor hh = g.select_rows(h, horizon_rows);
    Tensor out = mlp(g, hh, codec.dec_w1, codec.dec_b1, codec.dec_w2, codec.dec_b2);
    out = g.reshape(out, {B, Nh * P});
    f.per_size.push_back(g.slice_cols(out, 0, T));
  }

  Tensor total = f.per_size.front();
  for (std::size_t i = 1; i < f.per_size.size(); ++i) total = g.add(total, f.per_size[i]);
  f.assembled = g.scale(total, 1.0 / static_cast<double>(f.per_size.size()));
  return f;
}

Forecast forward(const ModelState& state, const Window& w, ForwardOptions options) {
  Graph g(false);
  return forward(state, g, std::span<const Window>(&w, 1), options);
}

Tensor composite_loss(Graph& g, const Forecast& f, std::span<const std::vector<double>> targets,
                      std::span<const double> weights) {
  const std::size_t B = f.batch(), T = f.horizon();
  if (targets.size() != B) {
    throw DimensionError("composite_loss: " + std::to_string(targets.size()) +
                         " targets for a batch of " + std::to_string(B));
  }
  if (weights.size() != T) {
    throw DimensionError("composite_loss: " + std::to_string(weights.size()) +
                         " weights for horizon " + std::to_string(T));
  }
  std::vector<double> tv(B * T), wv(B * T);
  const double inv_b = 1.0 / static_cast<double>(B);
  for (std::size_t b = 0; b < B; ++b) {
    if (targets[b].size() != T) {
      throw DimensionError("composite_loss: target of length " + std::to_string(targets[b].size()) +
                           " for horizon " + std::to_string(T));
    }
    for (std::size_t t = 0; t < T; ++t) {
      tv[b * T + t] = (targets[b][t] - f.stats[b].mean) / f.stats[b].scale;
      wv[b * T + t] = weights[t] * inv_b;
    }
  }
  const Tensor target = Tensor::from({B, T}, std::move(tv));
  const Tensor w = Tensor::from({B, T}, std::move(wv));
  Tensor total = g.mse(f.assembled, target, w);
  for (const Tensor& branch : f.per_size) total = g.add(g.mse(branch, target, w), total);
  return g.scale(total, 1.0 / static_cast<double>(f.per_size.size() + 1));
}

std::map<std::string, std::string> model_config_entries(const ElasTSTConfig& c) {
  std::ostringstream sizes;
  for (std::size_t i = 0; i < c.patch_sizes.size(); ++i) sizes << (i ? "," : "") << c.patch_sizes[i];
  return {
      {"model.patch_sizes", sizes.str()},
      {"model.d_model", std::to_string(c.attention.d_model)},
      {"model.n_heads", std::to_string(c.attention.n_heads)},
      {"model.head_dim", std::to_string(c.attention.head_dim)},
      {"model.d_ff", std::to_string(c.attention.d_ff)},
      {"model.n_layers", std::to_string(c.attention.n_layers)},
      {"model.lookback", std::to_string(c.lookback)},
      {"model.instance_norm", c.instance_norm ? "true" : "false"},
      {"model.norm_eps", format_double(c.norm_eps)},
      {"trope.p_min", format_double(c.period_spec.p_min)},
      {"trope.p_max", format_double(c.period_spec.p_max)},
  };
}

namespace {

const std::string& require_entry(const std::map<std::string, std::string>& m, const char* key) {
  auto it = m.find(key);
  if (it == m.end()) throw IngestionError(std::string("checkpoint: missing config key ") + key);
  return it->second;
}

std::size_t parse_size(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != s.size() || s.empty() || s.front() == '-') {
    throw IngestionError("checkpoint: bad integer '" + s + "' for " + what);
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

ElasTSTConfig model_config_from_entries(const std::map<std::string, std::string>& m) {
  ElasTSTConfig c;
  c.patch_sizes.clear();
  std::stringstream ss(require_entry(m, "model.patch_sizes"));
  for (std::string item; std::getline(ss, item, ',');)
    c.patch_sizes.push_back(parse_size(item, "model.patch_sizes"));
  c.attention.d_model = parse_size(require_entry(m, "model.d_model"), "model.d_model");
  c.attention.n_heads = parse_size(require_entry(m, "model.n_heads"), "model.n_heads");
  c.attention.head_dim = parse_size(require_entry(m, "model.head_dim"), "model.head_dim");
  c.attention.d_ff = parse_size(require_entry(m, "model.d_ff"), "model.d_ff");
  c.attention.n_layers = parse_size(require_entry(m, "model.n_layers"), "model.n_layers");
  c.lookback = parse_size(require_entry(m, "model.lookback"), "model.lookback");
  c.instance_norm = require_entry(m, "model.instance_norm") == "true";
  c.norm_eps = parse_double(require_entry(m, "model.norm_eps"), "model.norm_eps");
  c.period_spec.p_min = parse_double(require_entry(m, "trope.p_min"), "trope.p_min");
  c.period_spec.p_max = parse_double(require_entry(m, "trope.p_max"), "trope.p_max");
  c.period_spec.head_dim = c.attention.head_dim;
  return c;
}

}  // namespace elastst
