// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace elastst {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major array of doubles with an optional gradient buffer.
//
// Tensor is a handle: copies share storage. Use clone() for a deep copy.
// Most operations treat a tensor as a matrix of rows() x cols(), where
// cols() is the last extent and rows() the product of the leading ones.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data();
  std::span<const double> data() const;
  double* ptr() { return data().data(); }
  const double* ptr() const { return data().data(); }
  double item() const;
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);

  bool has_grad() const;
  // Allocates a zero gradient if none exists yet.
  std::span<double> grad();
  std::span<double> grad() const;  // handle semantics: grads are writable through copies
  void zero_grad();
  void drop_grad();

  // Same storage, different shape. Extents must multiply to numel().
  Tensor view(Shape shape) const;

  // Deep copy of the values; the copy carries no gradient.
  Tensor clone() const;

  bool same_storage(const Tensor& other) const {
    return impl_ && other.impl_ && impl_->storage == other.impl_->storage;
  }

 private:
  // Views share one Storage, so gradients written through a view land in
  // the same buffer as the original.
  struct Storage {
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  struct Impl {
    Shape shape;
    std::shared_ptr<Storage> storage;
  };
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
  const Impl& impl() const;
  Impl& impl();

  std::shared_ptr<Impl> impl_;
};

}  // namespace elastst
