// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "elastst/tensor.hpp"

namespace elastst {

// Tape of executed differentiable operations.
//
// Each op computes its result eagerly. When recording is on and any input
// requires a gradient, the result is marked as requiring one and a backward
// closure is appended to the tape. backward() replays the tape in reverse.
// A Graph constructed with record=false never touches gradients and can be
// used for concurrent inference over shared parameters.
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  // Drops every recorded node (and with it all intermediate activations).
  void clear() { nodes_.clear(); }

  // Seeds d(loss)/d(loss) = 1 and propagates. Gradients of leaf tensors
  // accumulate across calls; intermediate gradients are reset first.
  void backward(const Tensor& loss);

  // Registers `out` as produced from `inputs`. Returns true when a node was
  // recorded (so the caller's closure will run during backward).
  bool record(Tensor& out, std::initializer_list<Tensor> inputs, std::function<void()> backward_fn);
  bool record(Tensor& out, const std::vector<Tensor>& inputs, std::function<void()> backward_fn);

  Tensor matmul(const Tensor& a, const Tensor& b);
  // x[r x in] * w[in x out] + bias[out], bias applied to every row.
  Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& a, double s);
  Tensor gelu(const Tensor& x);
  Tensor softmax_lastdim(const Tensor& x);
  Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

  Tensor concat_rows(const std::vector<Tensor>& parts);
  Tensor concat_cols(const std::vector<Tensor>& parts);
  Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
  Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
  Tensor select_rows(const Tensor& x, std::span<const std::size_t> indices);
  // Same values, new shape; shares storage (and gradient) with x.
  Tensor reshape(const Tensor& x, Shape shape) { return x.view(std::move(shape)); }

  Tensor sum(const Tensor& x);
  Tensor mean(const Tensor& x);
  // sum_i weights_i * (pred_i - target_i)^2. No implicit 1/n.
  Tensor mse(const Tensor& pred, const Tensor& target, const Tensor& weights);

 private:
  struct Node {
    Tensor out;
    std::function<void()> backward;
  };

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace elastst
