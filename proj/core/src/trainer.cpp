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

#include "orthocare/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

#include "json.hpp"
#include "orthocare/error.hpp"
#include "orthocare/metrics.hpp"

namespace orthocare {

VariantPlan plan_for(Variant variant, const LossWeights& configured) {
  VariantPlan plan;
  plan.weights = configured;
  switch (variant) {
    case Variant::kFull:
      break;
    case Variant::kNoRecNoDcl:
      plan.weights.lambda2 = 0.0;
      plan.weights.lambda3 = 0.0;
      break;
    case Variant::kNoOrthNoDcl:
      plan.recon_euclidean = true;
      plan.weights.lambda3 = 0.0;
      break;
    case Variant::kEuclideanMetric:
      plan.recon_euclidean = true;
      plan.project_euclidean = true;
      break;
    case Variant::kNoDcl:
      plan.weights.lambda3 = 0.0;
      break;
    case Variant::kBase:
    case Variant::kOracle:
      plan.weights.lambda1 = 0.0;
      plan.weights.lambda2 = 0.0;
      plan.weights.lambda3 = 0.0;
      plan.use_target = false;
      break;
  }
  return plan;
}

int stage_for_epoch(const TrainConfig& cfg, std::size_t epoch) {
  if (epoch <= cfg.stage1_end) return 1;
  if (epoch <= cfg.stage2_end) return 2;
  return 3;
}

namespace {

bool uses_recon(const VariantPlan& plan, int stage) {
  return stage >= 2 && plan.weights.lambda2 != 0.0;
}

bool uses_domain(const VariantPlan& plan, int stage) {
  return plan.use_target && stage >= 3 && plan.weights.lambda3 != 0.0;
}

}  // namespace

StepLosses step_losses(ad::Graph& g, Model& model, const ExperimentConfig& cfg,
                       const VariantPlan& plan, int stage, RecordBatch source,
                       RecordBatch target) {
  if (source.size() < 2) throw InputError("training step needs at least 2 source records");
  if (plan.use_target && target.size() < 2) {
    throw InputError("training step needs at least 2 target records");
  }
  const LossWeights& w = plan.weights;
  StepLosses out;
  ad::Var vs = model.encoder.encode_batch(g, source);
  ad::Var ps = model.label_head.probabilities(g, vs);
  const Tensor ys = label_matrix(source, model.n_labels());
  ad::Var v_all = vs;
  if (plan.use_target) {
    ad::Var vt = model.encoder.encode_batch(g, target);
    const LabelLoss ll = label_loss(vs, ps, ys, vt, w.lambda1, cfg.mmd);
    out.label = ll.total;
    out.bce = ll.bce;
    out.mmd = ll.mmd;
    v_all = ad::concat(vs, vt);
  } else {
    out.bce = bce(ps, ys);
    out.label = out.bce;
    out.mmd = g.constant(Tensor::scalar(0.0));
  }
  out.total = ad::scale(out.label, w.lambda_label);
  out.weighted_sum = w.lambda_label * out.label.value().item();

  ad::Var v_hat;
  if (uses_recon(plan, stage)) {
    ReconOptions opts;
    opts.gamma = w.gamma;
    opts.freeze_metric = cfg.train.freeze_metric_in_recon;
    opts.euclidean = plan.recon_euclidean;
    const ReconLoss rl = recon_loss(g, model.sae, v_all, opts);
    out.recon = rl.total;
    v_hat = rl.v_hat;
    out.total = ad::add(out.total, ad::scale(rl.total, w.lambda2));
    out.weighted_sum += w.lambda2 * rl.total.value().item();
  }
  if (uses_domain(plan, stage)) {
    if (!v_hat.valid()) v_hat = model.sae.decode(g, model.sae.encode(g, v_all));
    const MetricView metric = plan.project_euclidean
                                  ? MetricView::euclidean()
                                  : MetricView::dictionary(g.parameter(model.sae.weight));
    const ProjectionVars pr =
        project_rows(metric, v_all, v_hat, cfg.train.epsilon, cfg.train.detach_alpha);
    const std::size_t ns = source.size();
    ad::Var zs = ad::slice_rows(pr.z, 0, ns);
    ad::Var zt = ad::slice_rows(pr.z, ns, target.size());
    ad::Var dl = domain_loss(g, model.domain_head, zs, zt);
    out.domain = dl;
    out.total = ad::add(out.total, ad::scale(dl, w.lambda3));
    out.weighted_sum += w.lambda3 * dl.value().item();
  }
  return out;
}

std::vector<bool> active_parameters(Model& model, const VariantPlan& plan, int stage) {
  std::set<const Parameter*> sae, domain;
  for (auto* p : model.sae.parameters()) sae.insert(p);
  for (auto* p : model.domain_head.parameters()) domain.insert(p);
  const bool sae_on = uses_recon(plan, stage) || uses_domain(plan, stage);
  const bool domain_on = uses_domain(plan, stage);
  std::vector<bool> active;
  for (auto* p : model.parameters()) {
    if (sae.count(p)) {
      active.push_back(sae_on);
    } else if (domain.count(p)) {
      active.push_back(domain_on);
    } else {
      active.push_back(true);
    }
  }
  return active;
}

namespace {

void check_data(const ExperimentConfig& cfg, const data::Dataset& ds, const char* what) {
  if (ds.records.empty()) throw InputError(std::string(what) + " dataset is empty");
  if (ds.n_codes != 0 && ds.n_codes != cfg.data.n_codes) {
    throw InputError(std::string(what) + " dataset has " + std::to_string(ds.n_codes) +
                     " codes, config expects " + std::to_string(cfg.data.n_codes));
  }
  if (ds.n_labels != 0 && ds.n_labels != cfg.data.n_labels) {
    throw InputError(std::string(what) + " dataset has " + std::to_string(ds.n_labels) +
                     " labels, config expects " + std::to_string(cfg.data.n_labels));
  }
}

// Cycles through a fixed pool, reshuffling at the start of every pass.
class PoolSampler {
 public:
  PoolSampler(const data::Dataset& pool, Rng& rng) : pool_(pool), rng_(rng) {
    order_.resize(pool.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    cursor_ = order_.size();
  }
  std::vector<const data::PatientRecord*> next(std::size_t n) {
    std::vector<const data::PatientRecord*> batch;
    while (batch.size() < n) {
      if (cursor_ == order_.size()) {
        rng_.shuffle(std::span<std::size_t>(order_));
        cursor_ = 0;
      }
      batch.push_back(&pool_.records[order_[cursor_++]]);
    }
    return batch;
  }

 private:
  const data::Dataset& pool_;
  Rng& rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace

TrainResult train(const ExperimentConfig& config, const TrainData& data,
                  const EpochCallback& on_epoch) {
  config.validate();
  const TrainConfig& tc = config.train;
  const VariantPlan plan = plan_for(tc.variant, config.loss);
  if (data.source == nullptr) throw InputError("train: no source data");
  check_data(config, *data.source, "source");
  if (plan.use_target) {
    if (data.target == nullptr) throw InputError("train: no unlabeled target data");
    check_data(config, *data.target, "target");
    if (data.target->size() < 2) throw InputError("train: target pool needs >= 2 records");
  }
  const bool selecting = data.selection != nullptr && !data.selection->records.empty();

  Model model(config.model, config.data.n_codes, config.data.n_labels, tc.seed);
  Adam adam(model.parameters(), tc.adam_beta1, tc.adam_beta2, tc.adam_eps);
  Rng shuffle_rng(derive_seed(tc.seed, "shuffle"));
  Rng target_rng(derive_seed(tc.seed, "target"));
  std::optional<PoolSampler> target_sampler;
  if (plan.use_target) target_sampler.emplace(*data.target, target_rng);

  std::vector<std::size_t> order(data.source->size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  result.model = model;
  AdamState best_adam = adam.state();
  std::string best_rng = shuffle_rng.state() + "|" + target_rng.state();
  double best_metric = -1.0;
  int best_stage = 0;
  // Only models from the last stage of the schedule compete for selection.
  const int final_stage = stage_for_epoch(tc, tc.epochs);

  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    log.stage = stage_for_epoch(tc, epoch);
    log.learning_rate = multistep_lr(tc.learning_rate, tc.lr_decay_epochs, tc.lr_decay_factor,
                                     epoch);
    const auto active = active_parameters(model, plan, log.stage);
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t begin = 0; begin < order.size(); begin += tc.batch_size) {
      const std::size_t end = std::min(order.size(), begin + tc.batch_size);
      if (end - begin < 2) continue;  // MMD and BCE means need two rows
      std::vector<const data::PatientRecord*> source;
      for (std::size_t i = begin; i < end; ++i) source.push_back(&data.source->records[order[i]]);
      std::vector<const data::PatientRecord*> target;
      if (target_sampler) target = target_sampler->next(source.size());

      ad::Graph g;
      const StepLosses losses = step_losses(g, model, config, plan, log.stage, source, target);
      g.backward(losses.total);
      adam.step(log.learning_rate, active);

      const double total = losses.total.value().item();
      if (!std::isfinite(total)) {
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      log.combined_deviation =
          std::max(log.combined_deviation, std::abs(total - losses.weighted_sum));
      log.loss += total;
      log.label += losses.label.value().item();
      log.bce += losses.bce.value().item();
      log.mmd += losses.mmd.value().item();
      if (losses.recon) log.recon += losses.recon->value().item();
      if (losses.domain) log.domain += losses.domain->value().item();
      ++log.steps;
    }
    if (log.steps > 0) {
      const double n = static_cast<double>(log.steps);
      for (double* x : {&log.loss, &log.label, &log.bce, &log.mmd, &log.recon, &log.domain}) {
        *x /= n;
      }
    }

    const bool eligible = log.stage == final_stage;
    bool better = eligible && !selecting;
    if (selecting) {
      const Tensor probs = predict_probabilities(model, *data.selection);
      const double f1 = compute_metrics(probs, label_tensor(*data.selection), config.eval_k,
                                        config.eval_threshold)
                            .w_f1;
      log.selection_w_f1 = f1;
      better = eligible && f1 > best_metric;
      if (better) best_metric = f1;
    }
    if (better) {
      result.model = model;
      result.best_epoch = epoch;
      best_adam = adam.state();
      best_rng = shuffle_rng.state() + "|" + target_rng.state();
      best_stage = log.stage;
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(result.log.back(), model);
  }

  result.checkpoint = capture(config, result.model, best_adam);
  result.checkpoint.epoch = tc.epochs;
  result.checkpoint.best_epoch = result.best_epoch;
  result.checkpoint.stage = static_cast<std::uint32_t>(best_stage);
  result.checkpoint.selection_metric = selecting ? best_metric : 0.0;
  result.checkpoint.rng_state = best_rng;
  return result;
}

TrainResult run_baseline(BaselineKind kind, const ExperimentConfig& config,
                         const data::Dataset& source, const data::Dataset& labeled_target,
                         const data::Dataset* selection) {
  ExperimentConfig cfg = config;
  TrainData data;
  data.selection = selection;
  if (kind == BaselineKind::kBase) {
    cfg.train.variant = Variant::kBase;
    data.source = &source;
  } else {
    cfg.train.variant = Variant::kOracle;
    for (const auto& r : labeled_target.records) {
      if (r.label.size() != cfg.data.n_labels) {
        throw InputError("oracle baseline requires labeled target data");
      }
    }
    data.source = &labeled_target;
  }
  return train(cfg, data);
}

TrainResult run_variant(const ExperimentConfig& config, const ExperimentData& data,
                        const EpochCallback& on_epoch) {
  if (config.train.variant == Variant::kOracle) {
    for (const auto& r : data.target.train.records) {
      if (r.label.size() != config.data.n_labels) {
        throw InputError("oracle baseline requires labeled target data");
      }
    }
    return train(config, {&data.target.train, nullptr, &data.target.valid}, on_epoch);
  }
  return train(config, {&data.source.train, &data.target_pool, &data.target.valid}, on_epoch);
}

Tensor predict_target(const Checkpoint& checkpoint, const data::Dataset& target) {
  Model model = restore_model(checkpoint);
  return predict_probabilities(model, target);
}

data::Dataset strip_labels(const data::Dataset& ds, std::size_t limit) {
  data::Dataset out;
  out.split = ds.split;
  out.n_codes = ds.n_codes;
  out.n_labels = ds.n_labels;
  const std::size_t n = std::min(limit, ds.size());
  out.records.assign(ds.records.begin(), ds.records.begin() + static_cast<std::ptrdiff_t>(n));
  for (auto& r : out.records) r.label.clear();
  return out;
}

ExperimentData prepare_data(const ExperimentConfig& config) {
  ExperimentData out;
  out.source = data::split_dataset(data::generate(config.data, data::Domain::kSource));
  out.target = data::split_dataset(data::generate(config.data, data::Domain::kTarget));
  out.target_pool = strip_labels(out.target.valid, config.train.n_target_unlabeled);
  return out;
}

void write_log_jsonl(std::ostream& out, const std::vector<EpochLog>& log) {
  for (const auto& e : log) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["stage"] = e.stage;
    j["learning_rate"] = e.learning_rate;
    j["steps"] = e.steps;
    j["loss"] = e.loss;
    j["label"] = e.label;
    j["bce"] = e.bce;
    j["mmd"] = e.mmd;
    j["recon"] = e.recon;
    j["domain"] = e.domain;
    j["combined_deviation"] = e.combined_deviation;
    if (e.selection_w_f1) {
      j["selection_w_f1"] = *e.selection_w_f1;
    } else {
      j["selection_w_f1"] = nullptr;
    }
    out << j.dump() << '\n';
  }
}

}  // namespace orthocare
