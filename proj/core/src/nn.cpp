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

#include "orthocare/nn.hpp"

#include <cmath>

#include "orthocare/error.hpp"

namespace orthocare {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& x : t.data()) x = rng.uniform(-bound, bound);
  return t;
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : weight(name + ".weight",
             uniform_tensor({out, in}, 1.0 / std::sqrt(static_cast<double>(in)), rng)),
      bias(name + ".bias", Tensor({out})) {}

ad::Var Linear::operator()(ad::Graph& g, const ad::Var& x) {
  const bool single = x.shape().size() == 1;
  ad::Var batch = single ? ad::reshape(x, {1, x.shape()[0]}) : x;
  if (batch.shape().size() != 2 || batch.shape()[1] != in_dim()) {
    throw ShapeError("linear(" + weight.name + "): input " + shape_string(x.shape()) +
                     " does not match weight " + shape_string(weight.value.shape()));
  }
  ad::Var y = ad::add_row_bias(ad::matmul(batch, ad::transpose(g.parameter(weight))),
                               g.parameter(bias));
  return single ? ad::reshape(y, {out_dim()}) : y;
}

}  // namespace orthocare
