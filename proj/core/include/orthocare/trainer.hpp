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

// Staged training: label loss with alignment, then the reconstruction term,
// then the domain loss on M-orthogonal residuals.

#ifndef ORTHOCARE_TRAINER_HPP_
#define ORTHOCARE_TRAINER_HPP_

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "orthocare/checkpoint.hpp"
#include "orthocare/config.hpp"
#include "orthocare/model.hpp"

namespace orthocare {

// Which loss terms a variant uses and under which geometry.
struct VariantPlan {
  LossWeights weights;
  bool use_target = true;          // draws target batches (MMD, SAE, domain loss)
  bool recon_euclidean = false;    // SAE error under M = I
  bool project_euclidean = false;  // residual projection under M = I
};
VariantPlan plan_for(Variant variant, const LossWeights& configured);

// 1 for epochs [1, E1], 2 for (E1, E2], 3 afterwards.
int stage_for_epoch(const TrainConfig& cfg, std::size_t epoch);

struct StepLosses {
  ad::Var total;
  ad::Var label;  // bce + alignment
  ad::Var bce;
  ad::Var mmd;
  std::optional<ad::Var> recon;   // recon + gamma * sparsity
  std::optional<ad::Var> domain;
  // lambda_label * label + lambda2 * recon + lambda3 * domain recomputed from
  // the component values.
  double weighted_sum = 0.0;
};

// Builds the objective of one step at `stage`. `target` may be empty when
// the plan does not use target data.
StepLosses step_losses(ad::Graph& g, Model& model, const ExperimentConfig& cfg,
                       const VariantPlan& plan, int stage, RecordBatch source,
                       RecordBatch target);

// Parameters that receive an update at `stage`: the encoder and label head
// always, the SAE once its weight enters the loss, the domain head in stage 3.
std::vector<bool> active_parameters(Model& model, const VariantPlan& plan, int stage);

struct EpochLog {
  std::size_t epoch = 0;
  int stage = 0;
  double learning_rate = 0.0;
  std::size_t steps = 0;
  // Means over the epoch's steps.
  double loss = 0.0;
  double label = 0.0;
  double bce = 0.0;
  double mmd = 0.0;
  double recon = 0.0;
  double domain = 0.0;
  // max |total - weighted sum of components| over the epoch.
  double combined_deviation = 0.0;
  std::optional<double> selection_w_f1;
};

struct TrainData {
  const data::Dataset* source = nullptr;     // labeled
  const data::Dataset* target = nullptr;     // unlabeled pool; labels are never read
  const data::Dataset* selection = nullptr;  // labeled target validation, optional
};

struct TrainResult {
  Model model;  // parameters of the selected epoch
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
};

// Called after every epoch with the current (not the selected) model.
using EpochCallback = std::function<void(const EpochLog&, const Model&)>;

// Trains config.train.variant. Among epochs of the final stage, the selected
// one has the highest selection w-F1 (earliest on ties), or is the last epoch
// without a selection set. InputError on empty data; ConfigError on a bad schedule.
TrainResult train(const ExperimentConfig& config, const TrainData& data,
                  const EpochCallback& on_epoch = {});

enum class BaselineKind { kBase, kOracle };

// Supervised training with every adaptation term off: Base on the source
// data, Oracle on `labeled_target`. Oracle throws InputError when that data
// carries no labels.
TrainResult run_baseline(BaselineKind kind, const ExperimentConfig& config,
                         const data::Dataset& source, const data::Dataset& labeled_target,
                         const data::Dataset* selection);

// Label probabilities p(f(x)) from a checkpoint; InputError on a vocabulary
// mismatch.
Tensor predict_target(const Checkpoint& checkpoint, const data::Dataset& target);

// The synthetic benchmark as the trainer consumes it.
struct ExperimentData {
  data::SplitDatasets source;
  data::SplitDatasets target;
  data::Dataset target_pool;  // first n_target_unlabeled target validation records, labels removed
};
ExperimentData prepare_data(const ExperimentConfig& config);
data::Dataset strip_labels(const data::Dataset& ds, std::size_t limit);

// Trains config.train.variant on prepared data: source train, the unlabeled
// target pool, target validation for selection; Oracle uses target train.
TrainResult run_variant(const ExperimentConfig& config, const ExperimentData& data,
                        const EpochCallback& on_epoch = {});

void write_log_jsonl(std::ostream& out, const std::vector<EpochLog>& log);

}  // namespace orthocare

#endif  // ORTHOCARE_TRAINER_HPP_
