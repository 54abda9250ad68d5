// Copyright 2026 The infoplane Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "infoplane/core/autograd.hpp"

namespace infoplane::optim {

// SGD with heavy-ball momentum and coupled L2 weight decay (g += wd * w).
class Sgd {
 public:
  Sgd(std::vector<Var> params, double momentum, double weight_decay);
  void step(double lr);
  void zero_grad();

 private:
  std::vector<Var> params_;
  std::vector<Tensor> velocity_;
  double momentum_;
  double weight_decay_;
};

class Adam {
 public:
  Adam(std::vector<Var> params, double beta1 = 0.95, double beta2 = 0.9995, double eps = 1e-8);
  void step(double lr);
  void zero_grad();

 private:
  std::vector<Var> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  double beta1_, beta2_, eps_;
  long step_ = 0;
};

// 0.5 * lr0 * (1 + cos(pi * epoch / total_epochs)).
double cosine_lr(double lr0, int epoch, int total_epochs);

}  // namespace infoplane::optim
