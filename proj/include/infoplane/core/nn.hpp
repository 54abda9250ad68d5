// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "infoplane/core/ops.hpp"
#include "infoplane/core/rng.hpp"

namespace infoplane::nn {

struct NamedVar {
  std::string name;
  Var var;
};

// Ordered collection of trainable parameters and non-trainable buffers. Entries alias the
// module members, so serialization and optimizers see live values.
class ParamRegistry {
 public:
  Var add_param(const std::string& name, Tensor init);
  Var add_buffer(const std::string& name, Tensor init);

  const std::vector<NamedVar>& params() const { return params_; }
  const std::vector<NamedVar>& buffers() const { return buffers_; }
  std::vector<Var> trainable() const;
  std::size_t num_parameters() const;
  void set_trainable(bool on);
  void zero_grad();
  // Appends every entry of `other`, with its names prefixed.
  void extend(const ParamRegistry& other, const std::string& prefix);

 private:
  std::vector<NamedVar> params_;
  std::vector<NamedVar> buffers_;
};

enum class Init { kHeNormal, kUniformFanIn };

Tensor init_weight(const Shape& shape, int fan_in, Init init, Rng& rng);

struct Conv2d {
  Var weight;
  Var bias;  // empty when constructed without bias
  ops::ConvOptions options;

  Var operator()(const Var& x) const { return ops::conv2d(x, weight, bias, options); }
};

Conv2d make_conv(ParamRegistry& reg, const std::string& name, int cin, int cout, int kh, int kw,
                 ops::ConvOptions options, Rng& rng, Init init = Init::kHeNormal, bool with_bias = true);

struct ConvTranspose2d {
  Var weight;
  Var bias;
  int stride = 1;

  Var operator()(const Var& x, int extra_h = 0, int extra_w = 0) const {
    return ops::conv_transpose2d(x, weight, bias, stride, extra_h, extra_w);
  }
};

ConvTranspose2d make_conv_transpose(ParamRegistry& reg, const std::string& name, int cin, int cout, int kh, int kw,
                                    int stride, Rng& rng);

struct BatchNorm2d {
  Var gamma;
  Var beta;
  Var running_mean;
  Var running_var;

  Var operator()(const Var& x, bool training) const;
};

BatchNorm2d make_batch_norm(ParamRegistry& reg, const std::string& name, int channels);

struct Linear {
  Var weight;
  Var bias;

  Var operator()(const Var& x) const { return ops::linear(x, weight, bias); }
};

Linear make_linear(ParamRegistry& reg, const std::string& name, int in, int out, Rng& rng);

}  // namespace infoplane::nn
