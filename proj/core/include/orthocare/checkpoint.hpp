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

// Binary training checkpoints.
//
// Layout (all integers little-endian, doubles as IEEE-754 bit patterns):
//   "OCKP" u32 version
//   str config_text  u64 config_hash  str variant
//   u64 epoch  u64 best_epoch  u32 stage  f64 selection_metric
//   str rng_state
//   u64 n_tensors, then per tensor: str name  u64 rank  u64 extents[rank]
//       f64 value[]  f64 adam_m[]  f64 adam_v[]  u64 adam_steps
// where str is u64 length followed by raw bytes.

#ifndef ORTHOCARE_CHECKPOINT_HPP_
#define ORTHOCARE_CHECKPOINT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "orthocare/config.hpp"
#include "orthocare/model.hpp"
#include "orthocare/optim.hpp"

namespace orthocare {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  Tensor value;
  Tensor adam_m;
  Tensor adam_v;
  std::uint64_t adam_steps = 0;

  friend bool operator==(const CheckpointTensor&, const CheckpointTensor&) = default;
};

struct Checkpoint {
  std::string config_text;
  std::uint64_t config_hash = 0;
  std::string variant;
  std::uint64_t epoch = 0;       // epochs completed when the state was captured
  std::uint64_t best_epoch = 0;  // epoch whose parameters are stored
  std::uint32_t stage = 0;       // highest stage reached (0 before training)
  double selection_metric = 0.0;
  std::string rng_state;
  std::vector<CheckpointTensor> tensors;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;

  const CheckpointTensor& tensor(const std::string& name) const;
};

std::string serialize(const Checkpoint& ckpt);
// InputError on a bad magic, version or truncated payload.
Checkpoint deserialize(const std::string& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Capture and restore model parameters plus optimizer moments.
Checkpoint capture(const ExperimentConfig& config, const Model& model, const AdamState& adam);
// Rebuilds the model described by the stored config and loads its tensors.
Model restore_model(const Checkpoint& ckpt);
ExperimentConfig checkpoint_config(const Checkpoint& ckpt);
AdamState restore_adam(const Checkpoint& ckpt);

}  // namespace orthocare

#endif  // ORTHOCARE_CHECKPOINT_HPP_
