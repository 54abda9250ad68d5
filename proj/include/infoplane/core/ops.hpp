// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "infoplane/core/autograd.hpp"

// Differentiable tensor operations. Spatial ops take NCHW inputs.
namespace infoplane::ops {

Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, float s);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var leaky_relu(const Var& a, float slope);
Var elu(const Var& a);
// elu(concat(x, -x)) along channels; doubles the channel count.
Var concat_elu(const Var& a);

Var concat_channels(const Var& a, const Var& b);
Var slice_channels(const Var& a, int begin, int end);
Var reshape(const Var& a, Shape shape);
Var sum(const Var& a);

struct ConvOptions {
  int stride = 1;
  int pad_top = 0;
  int pad_bottom = 0;
  int pad_left = 0;
  int pad_right = 0;

  static ConvOptions same(int kernel, int stride = 1) {
    const int p = (kernel - 1) / 2;
    return {stride, p, p, p, p};
  }
};

// w: [Cout, Cin, kh, kw]; bias: [Cout] or empty.
Var conv2d(const Var& x, const Var& w, const Var& bias, const ConvOptions& opt);
// w: [Cin, Cout, kh, kw]; output spatial size (H-1)*stride + kh + extra_h.
Var conv_transpose2d(const Var& x, const Var& w, const Var& bias, int stride, int extra_h, int extra_w);
Var crop(const Var& x, int top, int left, int height, int width);
// out[i][j] = x[i - down][j - right], zero where the source is outside the image.
Var shift(const Var& x, int down, int right);
Var avg_pool2d(const Var& x, int kernel);
Var upsample_nearest(const Var& x, int factor);
// Depth-to-space: out[c][i*r + a][j*r + b] = in[c*r*r + a*r + b][i][j].
Var pixel_shuffle(const Var& x, int factor);

// x: [N, D], w: [O, D], b: [O].
Var linear(const Var& x, const Var& w, const Var& b);
// x: [N, C, H, W] plus v: [N, C] broadcast over space.
Var add_channel_bias(const Var& x, const Var& v);

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean, Tensor& running_var,
               bool training, float momentum = 0.1f, float eps = 1e-5f);

// Mean negative log-likelihood of integer labels; optionally reports the per-example values.
Var softmax_cross_entropy(const Var& logits, std::span<const int> labels,
                          std::vector<double>* per_example = nullptr);
Var mse(const Var& a, const Tensor& target);

// Forward-only helpers.
Tensor log_softmax_rows(const Tensor& logits);

}  // namespace infoplane::ops
