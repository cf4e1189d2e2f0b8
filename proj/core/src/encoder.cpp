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

#include "orthocare/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "orthocare/error.hpp"

namespace orthocare {

void check_record(const data::PatientRecord& record, std::size_t n_codes) {
  if (record.visits.empty()) throw InputError("encode: record has no visits");
  for (std::size_t t = 0; t < record.visits.size(); ++t) {
    if (record.visits[t].empty()) {
      throw InputError("encode: visit " + std::to_string(t) + " is empty");
    }
    for (auto c : record.visits[t]) {
      if (c >= n_codes) {
        throw InputError("encode: code " + std::to_string(c) + " outside vocabulary of " +
                         std::to_string(n_codes));
      }
    }
  }
}

Tensor bag_matrix(RecordBatch records, std::size_t n_codes) {
  Tensor a({records.size(), n_codes});
  for (std::size_t b = 0; b < records.size(); ++b) {
    const auto& r = *records[b];
    check_record(r, n_codes);
    const double w = 1.0 / static_cast<double>(r.visits.size());
    // Visits are sets; a code listed twice in one visit still counts once.
    for (const auto& visit : r.visits) {
      std::vector<std::uint32_t> codes(visit);
      std::sort(codes.begin(), codes.end());
      codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
      for (auto c : codes) a.at(b, c) += w;
    }
  }
  return a;
}

Encoder::Encoder(const EncoderConfig& config, Rng& rng)
    : config_(config),
      embeddings("encoder.embeddings",
                 uniform_tensor({config.n_codes, config.embed_dim},
                                1.0 / std::sqrt(static_cast<double>(config.embed_dim)), rng)),
      hidden("encoder.hidden", config.embed_dim, config.hidden_dim, rng),
      output("encoder.output", config.hidden_dim, config.out_dim, rng) {
  if (config.n_codes == 0 || config.embed_dim == 0 || config.hidden_dim == 0 ||
      config.out_dim == 0) {
    throw ConfigError("encoder: all dimensions must be positive");
  }
}

ad::Var Encoder::from_pooled(ad::Graph& g, const ad::Var& pooled) {
  return output(g, ad::relu(hidden(g, pooled)));
}

ad::Var Encoder::encode_batch(ad::Graph& g, RecordBatch records) {
  if (records.empty()) throw InputError("encode: empty batch");
  ad::Var a = g.constant(bag_matrix(records, config_.n_codes));
  return from_pooled(g, ad::matmul(a, g.parameter(embeddings)));
}

ad::Var Encoder::encode(ad::Graph& g, const data::PatientRecord& record) {
  const data::PatientRecord* one[] = {&record};
  return ad::reshape(encode_batch(g, one), {config_.out_dim});
}

std::vector<Parameter*> Encoder::parameters() {
  return {&embeddings, &hidden.weight, &hidden.bias, &output.weight, &output.bias};
}

LabelHead::LabelHead(std::size_t in_dim, std::size_t n_labels, Rng& rng)
    : linear("label_head", in_dim, n_labels, rng) {}

Tensor predict(LabelHead& head, const Tensor& v) {
  if (v.rank() != 1 || v.size() != head.linear.in_dim()) {
    throw ShapeError("predict: representation " + shape_string(v.shape()) +
                     " does not match head input " + std::to_string(head.linear.in_dim()));
  }
  ad::Graph g;
  return head.probabilities(g, g.constant(v)).value();
}

}  // namespace orthocare
