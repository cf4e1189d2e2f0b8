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

// Adam with per-parameter step counts and a multistep learning-rate
// schedule.

#ifndef ORTHOCARE_OPTIM_HPP_
#define ORTHOCARE_OPTIM_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "orthocare/tensor.hpp"

namespace orthocare {

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::vector<std::uint64_t> steps;
};

class Adam {
 public:
  Adam(std::vector<Parameter*> params, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  // Updates every parameter with active[i] set (all when active is empty)
  // from its accumulated grad, then zeroes all grads. Inactive parameters
  // keep their moments and step count.
  void step(double lr, const std::vector<bool>& active = {});
  void zero_grad();

  const AdamState& state() const { return state_; }
  void set_state(AdamState state);
  const std::vector<Parameter*>& params() const { return params_; }

 private:
  std::vector<Parameter*> params_;
  double beta1_, beta2_, eps_;
  AdamState state_;
};

// base * factor^(number of milestones < epoch): with 1-based epochs the
// rate drops once `milestone` epochs have completed.
double multistep_lr(double base, const std::vector<std::size_t>& milestones, double factor,
                    std::size_t epoch);

}  // namespace orthocare

#endif  // ORTHOCARE_OPTIM_HPP_
