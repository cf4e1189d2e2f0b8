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

// The full model: encoder, label head, sparse autoencoder and domain head.

#ifndef ORTHOCARE_MODEL_HPP_
#define ORTHOCARE_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "orthocare/config.hpp"
#include "orthocare/encoder.hpp"
#include "orthocare/ortho.hpp"
#include "orthocare/sae.hpp"

namespace orthocare {

class Model {
 public:
  Model() = default;
  Model(const ModelConfig& config, std::size_t n_codes, std::size_t n_labels,
        std::uint64_t seed);

  std::size_t n_codes() const { return encoder.config().n_codes; }
  std::size_t n_labels() const { return label_head.linear.out_dim(); }

  // Stable order: encoder, label head, SAE, domain head.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  Encoder encoder;
  LabelHead label_head;
  Sae sae;
  DomainHead domain_head;
};

// [n, o] label probabilities p(f(x)) for a dataset; the SAE and domain head
// are not on this path. InputError when the data's vocabulary differs.
Tensor predict_probabilities(Model& model, const data::Dataset& ds);
// [n, d] representations.
Tensor representations(Model& model, const data::Dataset& ds);

Tensor label_tensor(const data::Dataset& ds);

}  // namespace orthocare

#endif  // ORTHOCARE_MODEL_HPP_
