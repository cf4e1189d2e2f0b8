// Copyright 2026 The OrthoCare Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "orthocare/optim.hpp"

#include <cmath>

#include "orthocare/error.hpp"

namespace orthocare {

Adam::Adam(std::vector<Parameter*> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto* p : params_) {
    state_.m.push_back(Tensor::zeros_like(p->value));
    state_.v.push_back(Tensor::zeros_like(p->value));
    state_.steps.push_back(0);
  }
}

void Adam::step(double lr, const std::vector<bool>& active) {
  if (!active.empty() && active.size() != params_.size()) {
    throw ConfigError("Adam::step: active mask size mismatch");
  }
  for (std::size_t k = 0; k < params_.size(); ++k) {
    if (!active.empty() && !active[k]) continue;
    Parameter& p = *params_[k];
    auto& m = state_.m[k];
    auto& v = state_.v[k];
    const auto t = ++state_.steps[k];
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t));
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      p.value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
  zero_grad();
}

void Adam::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

void Adam::set_state(AdamState state) {
  if (state.m.size() != params_.size() || state.v.size() != params_.size() ||
      state.steps.size() != params_.size()) {
    throw InputError("Adam state does not match the parameter list");
  }
  for (std::size_t k = 0; k < params_.size(); ++k) {
    if (state.m[k].shape() != params_[k]->value.shape() ||
        state.v[k].shape() != params_[k]->value.shape()) {
      throw InputError("Adam state shape mismatch for " + params_[k]->name);
    }
  }
  state_ = std::move(state);
}

double multistep_lr(double base, const std::vector<std::size_t>& milestones, double factor,
                    std::size_t epoch) {
  double lr = base;
  for (auto m : milestones) {
    if (epoch > m) lr *= factor;
  }
  return lr;
}

}  // namespace orthocare
