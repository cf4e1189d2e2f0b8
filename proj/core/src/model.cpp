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

#include "orthocare/model.hpp"

#include <algorithm>
#include <string>

#include "orthocare/error.hpp"

namespace orthocare {

Model::Model(const ModelConfig& config, std::size_t n_codes, std::size_t n_labels,
             std::uint64_t seed) {
  Rng rng(derive_seed(seed, "init"));
  EncoderConfig ec;
  ec.n_codes = n_codes;
  ec.embed_dim = config.embed_dim;
  ec.hidden_dim = config.hidden_dim;
  ec.out_dim = config.repr_dim;
  encoder = Encoder(ec, rng);
  label_head = LabelHead(config.repr_dim, n_labels, rng);
  sae = Sae(config.repr_dim, config.sae_dim, rng);
  domain_head = DomainHead(config.repr_dim, config.domain_hidden1, config.domain_hidden2, rng);
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out = encoder.parameters();
  for (auto* p : label_head.parameters()) out.push_back(p);
  for (auto* p : sae.parameters()) out.push_back(p);
  for (auto* p : domain_head.parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  std::vector<const Parameter*> out;
  for (auto* p : const_cast<Model*>(this)->parameters()) out.push_back(p);
  return out;
}

namespace {

template <typename F>
Tensor batched_rows(Model& model, const data::Dataset& ds, std::size_t width, F f) {
  if (ds.n_codes != 0 && ds.n_codes != model.n_codes()) {
    throw InputError("vocabulary mismatch: data has " + std::to_string(ds.n_codes) +
                     " codes, model has " + std::to_string(model.n_codes()));
  }
  Tensor out({ds.size(), width});
  constexpr std::size_t kChunk = 512;
  for (std::size_t begin = 0; begin < ds.size(); begin += kChunk) {
    const std::size_t end = std::min(ds.size(), begin + kChunk);
    std::vector<const data::PatientRecord*> batch;
    for (std::size_t i = begin; i < end; ++i) batch.push_back(&ds.records[i]);
    ad::Graph g;
    const Tensor rows = f(g, batch).value();
    std::copy(rows.data().begin(), rows.data().end(), out.data().begin() + begin * width);
  }
  return out;
}

}  // namespace

Tensor predict_probabilities(Model& model, const data::Dataset& ds) {
  return batched_rows(model, ds, model.n_labels(), [&](ad::Graph& g, RecordBatch batch) {
    return model.label_head.probabilities(g, model.encoder.encode_batch(g, batch));
  });
}

Tensor representations(Model& model, const data::Dataset& ds) {
  return batched_rows(model, ds, model.encoder.config().out_dim,
                      [&](ad::Graph& g, RecordBatch batch) {
                        return model.encoder.encode_batch(g, batch);
                      });
}

Tensor label_tensor(const data::Dataset& ds) {
  std::vector<const data::PatientRecord*> all;
  for (const auto& r : ds.records) all.push_back(&r);
  return label_matrix(all, ds.n_labels);
}

}  // namespace orthocare
