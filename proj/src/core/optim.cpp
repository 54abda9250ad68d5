// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#include "infoplane/core/optim.hpp"

#include <cmath>
#include <numbers>

namespace infoplane::optim {

Sgd::Sgd(std::vector<Var> params, double momentum, double weight_decay)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
  for (const auto& p : params_) velocity_.emplace_back(p.shape(), 0.0f);
}

void Sgd::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var& p = params_[i];
    if (!p.has_grad()) continue;
    float* w = p.mutable_value().data();
    const float* g = p.grad().data();
    float* v = velocity_[i].data();
    for (std::size_t j = 0; j < velocity_[i].size(); ++j) {
      const double grad = g[j] + weight_decay_ * w[j];
      v[j] = static_cast<float>(momentum_ * v[j] + grad);
      w[j] -= static_cast<float>(lr * v[j]);
    }
  }
}

void Sgd::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

Adam::Adam(std::vector<Var> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.emplace_back(p.shape(), 0.0f);
    v_.emplace_back(p.shape(), 0.0f);
  }
}

void Adam::step(double lr) {
  ++step_;
  const double c1 = 1.0 - std::pow(beta1_, step_);
  const double c2 = 1.0 - std::pow(beta2_, step_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var& p = params_[i];
    if (!p.has_grad()) continue;
    float* w = p.mutable_value().data();
    const float* g = p.grad().data();
    float* m = m_[i].data();
    float* v = v_[i].data();
    for (std::size_t j = 0; j < m_[i].size(); ++j) {
      m[j] = static_cast<float>(beta1_ * m[j] + (1 - beta1_) * g[j]);
      v[j] = static_cast<float>(beta2_ * v[j] + (1 - beta2_) * g[j] * g[j]);
      w[j] -= static_cast<float>(lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_));
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double cosine_lr(double lr0, int epoch, int total_epochs) {
  return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * epoch / total_epochs));
}

}  // namespace infoplane::optim
