// SPDX-License-Identifier: Apache-2.0
#include "elastst/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "elastst/errors.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace elastst {

namespace {

#if defined(__GLIBC__)
// Tensor buffers are allocated and released every step. Keep them on the
// heap instead of mmap/munmap round trips that fault every page back in.
const bool kHeapTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
  return true;
}();
#endif

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  auto storage = std::make_shared<Storage>();
  storage->data.assign(shape_numel(shape), value);
  return Tensor(std::make_shared<Impl>(Impl{std::move(shape), std::move(storage)}));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("Tensor::from: shape " + shape_str(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto storage = std::make_shared<Storage>();
  storage->data = std::move(values);
  return Tensor(std::make_shared<Impl>(Impl{std::move(shape), std::move(storage)}));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

const Tensor::Impl& Tensor::impl() const {
  if (!impl_) throw ContractError("use of an undefined Tensor");
  return *impl_;
}

Tensor::Impl& Tensor::impl() {
  if (!impl_) throw ContractError("use of an undefined Tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }
std::size_t Tensor::numel() const { return impl().storage->data.size(); }

std::size_t Tensor::cols() const {
  const Shape& s = shape();
  return s.empty() ? 1 : s.back();
}

std::size_t Tensor::rows() const {
  const std::size_t c = cols();
  return c == 0 ? 0 : numel() / c;
}

std::span<double> Tensor::data() { return impl().storage->data; }
std::span<const double> Tensor::data() const { return impl().storage->data; }

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  }
  return impl().storage->data[0];
}

double& Tensor::at(std::size_t r, std::size_t c) { return impl().storage->data[r * cols() + c]; }
double Tensor::at(std::size_t r, std::size_t c) const {
  return impl().storage->data[r * cols() + c];
}

bool Tensor::requires_grad() const { return impl().storage->requires_grad; }

Tensor& Tensor::set_requires_grad(bool flag) {
  impl().storage->requires_grad = flag;
  return *this;
}

bool Tensor::has_grad() const { return !impl().storage->grad.empty() || numel() == 0; }

std::span<double> Tensor::grad() {
  Storage& s = *impl().storage;
  if (s.grad.size() != s.data.size()) s.grad.assign(s.data.size(), 0.0);
  return s.grad;
}

std::span<double> Tensor::grad() const {
  return const_cast<Tensor*>(this)->grad();
}

void Tensor::zero_grad() {
  Storage& s = *impl().storage;
  std::fill(s.grad.begin(), s.grad.end(), 0.0);
}

void Tensor::drop_grad() {
  Storage& s = *impl().storage;
  s.grad.clear();
  s.grad.shrink_to_fit();
}

Tensor Tensor::view(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw DimensionError("view: cannot reshape " + shape_str(this->shape()) + " to " +
                         shape_str(shape));
  }
  return Tensor(std::make_shared<Impl>(Impl{std::move(shape), impl().storage}));
}

Tensor Tensor::clone() const { return from(shape(), impl().storage->data); }

}  // namespace elastst
