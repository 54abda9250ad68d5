// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#include "infoplane/core/nn.hpp"

#include <cmath>

namespace infoplane::nn {

Var ParamRegistry::add_param(const std::string& name, Tensor init) {
  Var v(std::move(init), true);
  params_.push_back({name, v});
  return v;
}

Var ParamRegistry::add_buffer(const std::string& name, Tensor init) {
  Var v(std::move(init), false);
  buffers_.push_back({name, v});
  return v;
}

std::vector<Var> ParamRegistry::trainable() const {
  std::vector<Var> out;
  for (const auto& p : params_) {
    if (p.var.requires_grad()) out.push_back(p.var);
  }
  return out;
}

std::size_t ParamRegistry::num_parameters() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.var.value().size();
  return n;
}

void ParamRegistry::set_trainable(bool on) {
  for (auto& p : params_) p.var.set_requires_grad(on);
}

void ParamRegistry::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

void ParamRegistry::extend(const ParamRegistry& other, const std::string& prefix) {
  for (const auto& p : other.params_) params_.push_back({prefix + p.name, p.var});
  for (const auto& b : other.buffers_) buffers_.push_back({prefix + b.name, b.var});
}

Tensor init_weight(const Shape& shape, int fan_in, Init init, Rng& rng) {
  Tensor t(shape);
  if (init == Init::kHeNormal) {
    std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
    for (auto& v : t.values()) v = dist(rng);
  } else {
    const float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
    std::uniform_real_distribution<float> dist(-bound, bound);
    for (auto& v : t.values()) v = dist(rng);
  }
  return t;
}

Conv2d make_conv(ParamRegistry& reg, const std::string& name, int cin, int cout, int kh, int kw,
                 ops::ConvOptions options, Rng& rng, Init init, bool with_bias) {
  Conv2d c;
  c.options = options;
  const int fan_in = cin * kh * kw;
  c.weight = reg.add_param(name + ".weight", init_weight({cout, cin, kh, kw}, fan_in, init, rng));
  if (with_bias) c.bias = reg.add_param(name + ".bias", init_weight({cout}, fan_in, Init::kUniformFanIn, rng));
  return c;
}

ConvTranspose2d make_conv_transpose(ParamRegistry& reg, const std::string& name, int cin, int cout, int kh, int kw,
                                    int stride, Rng& rng) {
  ConvTranspose2d c;
  c.stride = stride;
  const int fan_in = cin * kh * kw;
  c.weight = reg.add_param(name + ".weight", init_weight({cin, cout, kh, kw}, fan_in, Init::kUniformFanIn, rng));
  c.bias = reg.add_param(name + ".bias", init_weight({cout}, fan_in, Init::kUniformFanIn, rng));
  return c;
}

Var BatchNorm2d::operator()(const Var& x, bool training) const {
  Var rm = running_mean;
  Var rv = running_var;
  return ops::batch_norm(x, gamma, beta, rm.mutable_value(), rv.mutable_value(), training);
}

BatchNorm2d make_batch_norm(ParamRegistry& reg, const std::string& name, int channels) {
  BatchNorm2d bn;
  bn.gamma = reg.add_param(name + ".gamma", Tensor({channels}, 1.0f));
  bn.beta = reg.add_param(name + ".beta", Tensor({channels}, 0.0f));
  bn.running_mean = reg.add_buffer(name + ".running_mean", Tensor({channels}, 0.0f));
  bn.running_var = reg.add_buffer(name + ".running_var", Tensor({channels}, 1.0f));
  return bn;
}

Linear make_linear(ParamRegistry& reg, const std::string& name, int in, int out, Rng& rng) {
  Linear l;
  l.weight = reg.add_param(name + ".weight", init_weight({out, in}, in, Init::kUniformFanIn, rng));
  l.bias = reg.add_param(name + ".bias", init_weight({out}, in, Init::kUniformFanIn, rng));
  return l;
}

}  // namespace infoplane::nn
