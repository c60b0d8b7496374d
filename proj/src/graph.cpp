// SPDX-License-Identifier: Apache-2.0
#include "elastst/graph.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "elastst/errors.hpp"
#include "elastst/kernels.hpp"

namespace elastst {

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

void require_matrix(const char* op, const Tensor& t) {
  if (t.dim() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                         shape_str(t.shape()));
  }
}

bool any_requires_grad(std::span<const Tensor> inputs) {
  for (const Tensor& t : inputs)
    if (t.defined() && t.requires_grad()) return true;
  return false;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

bool Graph::record(Tensor& out, const std::vector<Tensor>& inputs,
                   std::function<void()> backward_fn) {
  if (!record_ || !any_requires_grad(inputs)) return false;
  out.set_requires_grad(true);
  nodes_.push_back(Node{out, std::move(backward_fn)});
  return true;
}

bool Graph::record(Tensor& out, std::initializer_list<Tensor> inputs,
                   std::function<void()> backward_fn) {
  if (!record_ || !any_requires_grad(std::span<const Tensor>(inputs.begin(), inputs.size())))
    return false;
  out.set_requires_grad(true);
  nodes_.push_back(Node{out, std::move(backward_fn)});
  return true;
}

void Graph::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward: loss was not produced by recorded operations");
  }
  for (Node& n : nodes_) n.out.zero_grad();
  Tensor seed = loss;
  seed.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
}

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " * " +
                         shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros({m, n});
  kernels::gemm_nn(a.ptr(), b.ptr(), out.ptr(), m, k, n, false);
  record(out, {a, b}, [a, b, out, m, k, n]() mutable {
    const double* g = out.grad().data();
    if (a.requires_grad()) kernels::gemm_nt_acc(g, b.ptr(), a.grad().data(), m, n, k);
    if (b.requires_grad()) kernels::gemm_tn_acc(a.ptr(), g, b.grad().data(), m, k, n);
  });
  return out;
}

Tensor Graph::linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_matrix("linear", x);
  require_matrix("linear", w);
  const std::size_t m = x.shape()[0], k = x.shape()[1], n = w.shape()[1];
  if (w.shape()[0] != k || bias.numel() != n) {
    throw DimensionError("linear: " + shape_str(x.shape()) + " * " + shape_str(w.shape()) +
                         " + " + shape_str(bias.shape()));
  }
  Tensor out = Tensor::zeros({m, n});
  double* o = out.ptr();
  const double* bv = bias.ptr();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) o[i * n + j] = bv[j];
  kernels::gemm_nn(x.ptr(), w.ptr(), o, m, k, n, true);
  record(out, {x, w, bias}, [x, w, bias, out, m, k, n]() mutable {
    const double* g = out.grad().data();
    if (x.requires_grad()) kernels::gemm_nt_acc(g, w.ptr(), x.grad().data(), m, n, k);
    if (w.requires_grad()) kernels::gemm_tn_acc(x.ptr(), g, w.grad().data(), m, k, n);
    if (bias.requires_grad()) {
      double* gb = bias.grad().data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
    }
  });
  return out;
}

Tensor Graph::add(const Tensor& a, const Tensor& b) {
  if (b.numel() == 1 && a.numel() != 1) {
    Tensor out = a.clone();
    const double s = b.item();
    for (double& v : out.data()) v += s;
    record(out, {a, b}, [a, b, out]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        double acc = 0.0;
        for (double v : g) acc += v;
        b.grad()[0] += acc;
      }
    });
    return out;
  }
  if (a.numel() == 1 && b.numel() != 1) return add(b, a);
  require_same_shape("add", a, b);
  Tensor out = Tensor::zeros(a.shape());
  auto o = out.data();
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] + bv[i];
  record(out, {a, b}, [a, b, out]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) {
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
  return out;
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  Tensor out = Tensor::zeros(a.shape());
  auto o = out.data();
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] - bv[i];
  record(out, {a, b}, [a, b, out]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) {
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
  return out;
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
  if (b.numel() == 1 && a.numel() != 1) {
    Tensor out = a.clone();
    const double s = b.item();
    for (double& v : out.data()) v *= s;
    record(out, {a, b}, [a, b, out]() mutable {
      auto g = out.grad();
      auto av = a.data();
      if (a.requires_grad()) {
        const double sv = b.item();
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * sv;
      }
      if (b.requires_grad()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
        b.grad()[0] += acc;
      }
    });
    return out;
  }
  if (a.numel() == 1 && b.numel() != 1) return mul(b, a);
  require_same_shape("mul", a, b);
  Tensor out = Tensor::zeros(a.shape());
  auto o = out.data();
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * bv[i];
  record(out, {a, b}, [a, b, out]() mutable {
    auto g = out.grad();
    auto av = a.data(), bv = b.data();
    if (a.requires_grad()) {
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
  return out;
}

Tensor Graph::scale(const Tensor& a, double s) {
  Tensor out = a.clone();
  for (double& v : out.data()) v *= s;
  record(out, {a}, [a, out, s]() mutable {
    auto g = out.grad();
    auto ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
  });
  return out;
}

Tensor Graph::gelu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto o = out.data();
  auto xv = x.data();
  auto th = std::make_shared<std::vector<double>>(o.size());
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double v = xv[i];
    const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
    (*th)[i] = t;
    o[i] = 0.5 * v * (1.0 + t);
  }
  record(out, {x}, [x, out, th]() mutable {
    auto g = out.grad();
    auto xv = x.data();
    auto gx = x.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = xv[i];
      const double t = (*th)[i];
      const double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      gx[i] += g[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du);
    }
  });
  return out;
}

Tensor Graph::softmax_lastdim(const Tensor& x) {
  const std::size_t n = x.cols();
  if (n == 0) throw DimensionError("softmax_lastdim: empty last dimension");
  const std::size_t r = x.rows();
  Tensor out = Tensor::zeros(x.shape());
  const double* xv = x.ptr();
  double* o = out.ptr();
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = xv + i * n;
    double* orow = o + i * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, row[j]);
    if (mx == -std::numeric_limits<double>::infinity()) continue;  // fully masked: zero row
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      orow[j] = std::exp(row[j] - mx);
      total += orow[j];
    }
    for (std::size_t j = 0; j < n; ++j) orow[j] /= total;
  }
  record(out, {x}, [x, out, r, n]() mutable {
    const double* g = out.grad().data();
    const double* y = out.ptr();
    double* gx = x.grad().data();
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
    }
  });
  return out;
}

Tensor Graph::layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t n = x.cols();
  const std::size_t r = x.rows();
  if (gain.numel() != n || bias.numel() != n) {
    throw DimensionError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " +
                         shape_str(bias.shape()) + " do not match last dimension of " +
                         shape_str(x.shape()));
  }
  Tensor out = Tensor::zeros(x.shape());
  // Normalized values and per-row inverse std are kept for backward.
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto rstd = std::make_shared<std::vector<double>>(r);
  const double* xv = x.ptr();
  const double* gv = gain.ptr();
  const double* bv = bias.ptr();
  double* o = out.ptr();
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = xv + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(n);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[i] = rs;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mu) * rs;
      (*xhat)[i * n + j] = h;
      o[i * n + j] = gv[j] * h + bv[j];
    }
  }
  record(out, {x, gain, bias}, [x, gain, bias, out, xhat, rstd, r, n]() mutable {
    const double* g = out.grad().data();
    const double* gv = gain.ptr();
    const double* xh = xhat->data();
    if (gain.requires_grad()) {
      double* gg = gain.grad().data();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * xh[i * n + j];
    }
    if (bias.requires_grad()) {
      double* gb = bias.grad().data();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
    }
    if (x.requires_grad()) {
      double* gx = x.grad().data();
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < r; ++i) {
        double mean_d = 0.0, mean_dx = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double d = g[i * n + j] * gv[j];
          mean_d += d;
          mean_dx += d * xh[i * n + j];
        }
        mean_d *= inv_n;
        mean_dx *= inv_n;
        const double rs = (*rstd)[i];
        for (std::size_t j = 0; j < n; ++j) {
          const double d = g[i * n + j] * gv[j];
          gx[i * n + j] += rs * (d - mean_d - xh[i * n + j] * mean_dx);
        }
      }
    }
  });
  return out;
}

Tensor Graph::concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t n = parts.front().cols();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.cols() != n) {
      throw DimensionError("concat_rows: column mismatch " + shape_str(parts.front().shape()) +
                           " vs " + shape_str(p.shape()));
    }
    total += p.rows();
  }
  Tensor out = Tensor::zeros({total, n});
  double* o = out.ptr();
  for (const Tensor& p : parts) {
    std::copy(p.data().begin(), p.data().end(), o);
    o += p.numel();
  }
  record(out, parts, [parts, out]() mutable {
    const double* g = out.grad().data();
    for (Tensor p : parts) {
      if (p.requires_grad()) {
        auto gp = p.grad();
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[i];
      }
      g += p.numel();
    }
  });
  return out;
}

Tensor Graph::concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t r = parts.front().rows();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rows() != r) {
      throw DimensionError("concat_cols: row mismatch " + shape_str(parts.front().shape()) +
                           " vs " + shape_str(p.shape()));
    }
    total += p.cols();
  }
  Tensor out = Tensor::zeros({r, total});
  double* o = out.ptr();
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t c = p.cols();
    const double* pv = p.ptr();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) o[i * total + offset + j] = pv[i * c + j];
    offset += c;
  }
  record(out, parts, [parts, out, r, total]() mutable {
    const double* g = out.grad().data();
    std::size_t offset = 0;
    for (Tensor p : parts) {
      const std::size_t c = p.cols();
      if (p.requires_grad()) {
        double* gp = p.grad().data();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) gp[i * c + j] += g[i * total + offset + j];
      }
      offset += c;
    }
  });
  return out;
}

Tensor Graph::slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t n = x.cols();
  if (begin > end || end > x.rows()) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") outside " + shape_str(x.shape()));
  }
  Tensor out = Tensor::zeros({end - begin, n});
  std::copy(x.data().begin() + static_cast<std::ptrdiff_t>(begin * n),
            x.data().begin() + static_cast<std::ptrdiff_t>(end * n), out.ptr());
  record(out, {x}, [x, out, begin, n]() mutable {
    auto g = out.grad();
    double* gx = x.grad().data() + begin * n;
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
  return out;
}

Tensor Graph::slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t c = x.cols();
  const std::size_t r = x.rows();
  if (begin > end || end > c) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") outside " + shape_str(x.shape()));
  }
  const std::size_t w = end - begin;
  Tensor out = Tensor::zeros({r, w});
  const double* xv = x.ptr();
  double* o = out.ptr();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) o[i * w + j] = xv[i * c + begin + j];
  record(out, {x}, [x, out, begin, r, c, w]() mutable {
    const double* g = out.grad().data();
    double* gx = x.grad().data();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) gx[i * c + begin + j] += g[i * w + j];
  });
  return out;
}

Tensor Graph::select_rows(const Tensor& x, std::span<const std::size_t> indices) {
  const std::size_t n = x.cols();
  for (std::size_t idx : indices) {
    if (idx >= x.rows()) {
      throw DimensionError("select_rows: index " + std::to_string(idx) + " outside " +
                           shape_str(x.shape()));
    }
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  Tensor out = Tensor::zeros({idx.size(), n});
  const double* xv = x.ptr();
  double* o = out.ptr();
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy(xv + idx[i] * n, xv + (idx[i] + 1) * n, o + i * n);
  record(out, {x}, [x, out, idx = std::move(idx), n]() mutable {
    const double* g = out.grad().data();
    double* gx = x.grad().data();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) gx[idx[i] * n + j] += g[i * n + j];
  });
  return out;
}

Tensor Graph::sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  record(out, {x}, [x, out]() mutable {
    const double g = out.grad()[0];
    for (double& v : x.grad()) v += g;
  });
  return out;
}

Tensor Graph::mean(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor Graph::mse(const Tensor& pred, const Tensor& target, const Tensor& weights) {
  require_same_shape("mse", pred, target);
  require_same_shape("mse", pred, weights);
  auto p = pred.data(), t = target.data(), w = weights.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += w[i] * (p[i] - t[i]) * (p[i] - t[i]);
  Tensor out = Tensor::scalar(acc);
  record(out, {pred, target, weights}, [pred, target, weights, out]() mutable {
    const double g = out.grad()[0];
    auto p = pred.data(), t = target.data(), w = weights.data();
    if (pred.requires_grad()) {
      auto gp = pred.grad();
      for (std::size_t i = 0; i < p.size(); ++i) gp[i] += g * 2.0 * w[i] * (p[i] - t[i]);
    }
    if (target.requires_grad()) {
      auto gt = target.grad();
      for (std::size_t i = 0; i < p.size(); ++i) gt[i] -= g * 2.0 * w[i] * (p[i] - t[i]);
    }
    if (weights.requires_grad()) {
      auto gw = weights.grad();
      for (std::size_t i = 0; i < p.size(); ++i) gw[i] += g * (p[i] - t[i]) * (p[i] - t[i]);
    }
  });
  return out;
}

}  // namespace elastst
