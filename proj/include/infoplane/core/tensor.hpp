// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace infoplane {

using Shape = std::vector<int>;
// Storage with a fixed alignment, so vectorized kernels take the same path on every run.
using FloatBuffer = std::vector<float, Eigen::aligned_allocator<float>>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major float32 tensor with value semantics. Image batches are NCHW.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> values);
  Tensor(Shape shape, FloatBuffer values);

  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // 4-d accessor (n, c, h, w).
  float& at(int n, int c, int h, int w) {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  float at(int n, int c, int h, int w) const {
    return data_[((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  Tensor reshaped(Shape shape) const;
  void fill(float v);
  // Rows [begin, end) along axis 0.
  Tensor slice_batch(int begin, int end) const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  FloatBuffer data_;
};

// Concatenates along axis 0; trailing dimensions must agree.
Tensor concat_batch(std::span<const Tensor> parts);

}  // namespace infoplane
