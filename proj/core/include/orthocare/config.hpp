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

// Experiment configuration and its flat "key = value" text form.
//
// One key per line; '#' starts a comment; blank lines are ignored. Keys are
// grouped by prefix (data., model., train., loss., mmd., interpret., probe.,
// eval.). Unknown keys and unparsable values are rejected. Lists are comma
// separated.

#ifndef ORTHOCARE_CONFIG_HPP_
#define ORTHOCARE_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "orthocare/alignment.hpp"
#include "orthocare/synthetic.hpp"

namespace orthocare {

enum class Variant {
  kFull,
  kNoRecNoDcl,      // label loss with alignment only
  kNoOrthNoDcl,     // SAE under the Euclidean error, no residual, no domain loss
  kEuclideanMetric, // M = I in reconstruction and projection
  kNoDcl,           // full pipeline without the domain loss
  kBase,            // source-only supervised training
  kOracle,          // supervised training on labeled target data
};

std::string variant_name(Variant v);
// ConfigError for unknown names.
Variant parse_variant(const std::string& name);
const std::vector<Variant>& all_variants();

struct ModelConfig {
  std::size_t embed_dim = 128;
  std::size_t hidden_dim = 128;
  std::size_t repr_dim = 128;
  std::size_t sae_dim = 256;
  std::size_t domain_hidden1 = 256;
  std::size_t domain_hidden2 = 128;
};

struct TrainConfig {
  Variant variant = Variant::kFull;
  // Last epoch of stage 1, of stage 2, and the total epoch count.
  std::size_t stage1_end = 5;
  std::size_t stage2_end = 15;
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::vector<std::size_t> lr_decay_epochs{15, 20, 25};
  double lr_decay_factor = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double epsilon = 1e-6;
  bool detach_alpha = false;
  bool freeze_metric_in_recon = false;
  // Unlabeled target patients drawn from the target validation split.
  std::size_t n_target_unlabeled = 500;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AblationConfig {
  std::size_t top_k = 3;
  double label_threshold = 0.05;
  std::size_t domain_rank_n = 5;
  // Codes mapped by a dimension, largest label impact first.
  std::size_t max_codes_per_dim = 20;
  std::size_t n_patients = 10;

  void validate() const;
};

struct ProbeConfig {
  std::size_t steps = 500;
  double learning_rate = 0.1;
  double l2 = 1e-4;
  // Records per domain used for probing (taken from the test splits).
  std::size_t n_records = 1000;
};

struct ExperimentConfig {
  data::SyntheticConfig data;
  ModelConfig model;
  TrainConfig train;
  LossWeights loss;
  MmdConfig mmd;
  AblationConfig interpret;
  ProbeConfig probe;
  std::size_t eval_k = 3;
  double eval_threshold = 0.5;

  void validate() const;
  // Canonical text: every key, sorted, one per line.
  std::string to_text() const;
  std::uint64_t hash() const;
  // Apply "key=value" assignments on top of the current values.
  void apply(const std::map<std::string, std::string>& entries);
  void set(const std::string& key, const std::string& value);
  std::vector<std::string> keys() const;
};

// Parses the text format into ordered assignments. InputError names the
// offending line.
std::map<std::string, std::string> parse_key_values(std::istream& in,
                                                    const std::string& source = "config");

// "default" (or an empty path) yields the built-in defaults; anything else
// is read as a file and applied over them.
ExperimentConfig load_config(const std::string& path_or_default);

}  // namespace orthocare

#endif  // ORTHOCARE_CONFIG_HPP_
