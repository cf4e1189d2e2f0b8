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

// Dense layers and parameter initialization shared by the model heads.

#ifndef ORTHOCARE_NN_HPP_
#define ORTHOCARE_NN_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "orthocare/autodiff.hpp"
#include "orthocare/rng.hpp"
#include "orthocare/tensor.hpp"

namespace orthocare {

// Every value uniform in [-bound, bound].
Tensor uniform_tensor(Shape shape, double bound, Rng& rng);

// y = x W^T + b with W stored out x in.
struct Linear {
  Parameter weight;
  Parameter bias;

  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  std::size_t in_dim() const { return weight.value.cols(); }
  std::size_t out_dim() const { return weight.value.rows(); }
  // x is a batch [n, in] or a single [in] vector.
  ad::Var operator()(ad::Graph& g, const ad::Var& x);
};

}  // namespace orthocare

#endif  // ORTHOCARE_NN_HPP_
