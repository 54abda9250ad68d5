// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#include "infoplane/core/tensor.hpp"

#include <algorithm>
#include <numeric>

#include "infoplane/errors.hpp"

namespace infoplane {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : Tensor(std::move(shape), FloatBuffer(values.begin(), values.end())) {}

Tensor::Tensor(Shape shape, FloatBuffer values) : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_numel(shape_)) {
    throw ShapeError("tensor data size " + std::to_string(data_.size()) + " does not match shape " +
                     shape_str(shape_));
  }
}

int Tensor::dim(int axis) const {
  if (axis < 0) axis += ndim();
  if (axis < 0 || axis >= ndim()) throw ShapeError("axis out of range for shape " + shape_str(shape_));
  return shape_[axis];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::slice_batch(int begin, int end) const {
  if (shape_.empty() || begin < 0 || end > shape_[0] || begin > end) {
    throw ShapeError("bad batch slice on " + shape_str(shape_));
  }
  Shape s = shape_;
  s[0] = end - begin;
  const std::size_t row = shape_[0] ? data_.size() / shape_[0] : 0;
  return Tensor(s, FloatBuffer(data_.begin() + begin * row, data_.begin() + end * row));
}

Tensor concat_batch(std::span<const Tensor> parts) {
  if (parts.empty()) return {};
  Shape s = parts.front().shape();
  int total = 0;
  for (const auto& p : parts) {
    if (p.ndim() != static_cast<int>(s.size()) ||
        !std::equal(p.shape().begin() + 1, p.shape().end(), s.begin() + 1)) {
      throw ShapeError("concat_batch: mismatched shapes");
    }
    total += p.dim(0);
  }
  s[0] = total;
  FloatBuffer out;
  out.reserve(shape_numel(s));
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return Tensor(s, std::move(out));
}

}  // namespace infoplane
