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

// Patient encoder and multi-label prediction head.
//
// A visit embeds as the sum of its code embeddings, the record as the mean of
// its visit embeddings, and a two-layer MLP maps that to the representation
// v. Pooling is linear, so a batch pools as A E where A[b][c] counts the
// visits of record b containing code c divided by its visit count.

#ifndef ORTHOCARE_ENCODER_HPP_
#define ORTHOCARE_ENCODER_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "orthocare/autodiff.hpp"
#include "orthocare/nn.hpp"
#include "orthocare/synthetic.hpp"

namespace orthocare {

struct EncoderConfig {
  std::size_t n_codes = 200;
  std::size_t embed_dim = 128;
  std::size_t hidden_dim = 128;
  std::size_t out_dim = 128;
};

using RecordBatch = std::span<const data::PatientRecord* const>;

// Throws InputError on an empty record, an empty visit or an unknown code.
void check_record(const data::PatientRecord& record, std::size_t n_codes);

// [n, n_codes] pooling weights for a batch.
Tensor bag_matrix(RecordBatch records, std::size_t n_codes);

class Encoder {
 public:
  Encoder() = default;
  Encoder(const EncoderConfig& config, Rng& rng);

  const EncoderConfig& config() const { return config_; }

  // [n, out_dim] representations of a batch.
  ad::Var encode_batch(ad::Graph& g, RecordBatch records);
  // [out_dim] representation of one record.
  ad::Var encode(ad::Graph& g, const data::PatientRecord& record);
  // MLP applied to already pooled rows [n, embed_dim].
  ad::Var from_pooled(ad::Graph& g, const ad::Var& pooled);

  std::vector<Parameter*> parameters();

 private:
  EncoderConfig config_;

 public:
  Parameter embeddings;
  Linear hidden;
  Linear output;
};

// Logits W v + b; probabilities are their sigmoid.
class LabelHead {
 public:
  LabelHead() = default;
  LabelHead(std::size_t in_dim, std::size_t n_labels, Rng& rng);

  ad::Var logits(ad::Graph& g, const ad::Var& v) { return linear(g, v); }
  ad::Var probabilities(ad::Graph& g, const ad::Var& v) { return ad::sigmoid(logits(g, v)); }
  std::size_t n_labels() const { return linear.out_dim(); }
  std::vector<Parameter*> parameters() { return {&linear.weight, &linear.bias}; }

  Linear linear;
};

// sigmoid(W v + b) for a single vector v; ShapeError on a dimension mismatch.
Tensor predict(LabelHead& head, const Tensor& v);

}  // namespace orthocare

#endif  // ORTHOCARE_ENCODER_HPP_
