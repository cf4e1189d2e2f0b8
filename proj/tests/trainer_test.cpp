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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "orthocare/checkpoint.hpp"
#include "orthocare/error.hpp"
#include "orthocare/optim.hpp"
#include "orthocare/trainer.hpp"

namespace orthocare {
namespace {

ExperimentConfig tiny_config(std::uint64_t seed) {
  ExperimentConfig c;
  c.data.n_patients = 160;
  c.data.seed = seed;
  c.model = ModelConfig{8, 8, 8, 16, 16, 8};
  c.train.seed = seed;
  c.train.stage1_end = 1;
  c.train.stage2_end = 2;
  c.train.epochs = 3;
  c.train.batch_size = 32;
  c.train.n_target_unlabeled = 16;
  c.train.lr_decay_epochs = {2};
  return c;
}

struct TinyRun {
  ExperimentConfig config;
  ExperimentData data;
  TrainResult result;
};

TinyRun tiny_run(std::uint64_t seed, Variant variant = Variant::kFull) {
  TinyRun run{tiny_config(seed), {}, {}};
  run.config.train.variant = variant;
  run.data = prepare_data(run.config);
  run.result = train(run.config, {&run.data.source.train, &run.data.target_pool,
                                  &run.data.target.valid});
  return run;
}

std::vector<const data::PatientRecord*> first_records(const data::Dataset& ds, std::size_t n) {
  std::vector<const data::PatientRecord*> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(&ds.records[i]);
  return out;
}

bool all_zero(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](double x) { return x == 0.0; });
}

TEST(Schedule, StageBoundaries) {
  TrainConfig tc;
  EXPECT_EQ(stage_for_epoch(tc, 1), 1);
  EXPECT_EQ(stage_for_epoch(tc, 5), 1);
  EXPECT_EQ(stage_for_epoch(tc, 6), 2);
  EXPECT_EQ(stage_for_epoch(tc, 15), 2);
  EXPECT_EQ(stage_for_epoch(tc, 16), 3);
  tc.stage1_end = 0;
  tc.stage2_end = 10;
  EXPECT_EQ(stage_for_epoch(tc, 1), 2);
  EXPECT_EQ(stage_for_epoch(tc, 11), 3);
}

TEST(Schedule, MultistepDecay) {
  const std::vector<std::size_t> m{15, 20, 25};
  EXPECT_DOUBLE_EQ(multistep_lr(1e-3, m, 0.1, 1), 1e-3);
  EXPECT_DOUBLE_EQ(multistep_lr(1e-3, m, 0.1, 15), 1e-3);
  EXPECT_NEAR(multistep_lr(1e-3, m, 0.1, 16), 1e-4, 1e-18);
  EXPECT_NEAR(multistep_lr(1e-3, m, 0.1, 21), 1e-5, 1e-19);
  EXPECT_NEAR(multistep_lr(1e-3, m, 0.1, 30), 1e-6, 1e-20);
}

TEST(AdamTest, FirstStepsMatchHandRecurrence) {
  Parameter p("p", Tensor::vector({1.0, -2.0}));
  Adam adam({&p}, 0.9, 0.999, 1e-8);
  const std::vector<double> g1{0.5, -4.0}, g2{-1.0, 2.0};
  double m[2] = {0, 0}, v[2] = {0, 0}, x[2] = {1.0, -2.0};
  for (int t = 1; t <= 2; ++t) {
    const auto& g = t == 1 ? g1 : g2;
    p.grad = Tensor::vector(g);
    adam.step(0.01);
    for (int i = 0; i < 2; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, t));
      const double vh = v[i] / (1 - std::pow(0.999, t));
      x[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
      EXPECT_NEAR(p.value[i], x[i], 1e-15);
    }
    EXPECT_TRUE(all_zero(p.grad));
  }
  EXPECT_EQ(adam.state().steps[0], 2u);
}

TEST(AdamTest, InactiveParametersKeepValueAndMoments) {
  Parameter a("a", Tensor::vector({1.0})), b("b", Tensor::vector({1.0}));
  Adam adam({&a, &b});
  a.grad[0] = 1.0;
  b.grad[0] = 1.0;
  adam.step(0.1, {true, false});
  EXPECT_NE(a.value[0], 1.0);
  EXPECT_EQ(b.value[0], 1.0);
  EXPECT_EQ(b.grad[0], 0.0);
  EXPECT_EQ(adam.state().steps[1], 0u);
  EXPECT_TRUE(all_zero(adam.state().m[1]));
  EXPECT_THROW(adam.step(0.1, {true}), ConfigError);
}

TEST(Variants, PlansSwitchTheDocumentedTerms) {
  const LossWeights w;
  const auto full = plan_for(Variant::kFull, w);
  EXPECT_EQ(full.weights.lambda2, w.lambda2);
  EXPECT_EQ(full.weights.lambda3, w.lambda3);
  EXPECT_FALSE(full.recon_euclidean || full.project_euclidean);
  const auto nrd = plan_for(Variant::kNoRecNoDcl, w);
  EXPECT_EQ(nrd.weights.lambda2, 0.0);
  EXPECT_EQ(nrd.weights.lambda3, 0.0);
  const auto nod = plan_for(Variant::kNoOrthNoDcl, w);
  EXPECT_TRUE(nod.recon_euclidean);
  EXPECT_EQ(nod.weights.lambda3, 0.0);
  const auto eu = plan_for(Variant::kEuclideanMetric, w);
  EXPECT_TRUE(eu.recon_euclidean && eu.project_euclidean);
  EXPECT_EQ(eu.weights.lambda3, w.lambda3);
  EXPECT_EQ(plan_for(Variant::kNoDcl, w).weights.lambda3, 0.0);
  for (auto v : {Variant::kBase, Variant::kOracle}) {
    const auto p = plan_for(v, w);
    EXPECT_FALSE(p.use_target);
    EXPECT_EQ(p.weights.lambda1 + p.weights.lambda2 + p.weights.lambda3, 0.0);
  }
}

TEST(Trainer, StageGatingLeavesInactiveGradientsZero) {
  const auto cfg = tiny_config(3);
  const auto d = prepare_data(cfg);
  Model model(cfg.model, cfg.data.n_codes, cfg.data.n_labels, 3);
  const auto plan = plan_for(Variant::kFull, cfg.loss);
  const auto src = first_records(d.source.train, 16);
  const auto tgt = first_records(d.target_pool, 16);
  for (int stage = 1; stage <= 3; ++stage) {
    for (auto* p : model.parameters()) p->zero_grad();
    ad::Graph g;
    const auto losses = step_losses(g, model, cfg, plan, stage, src, tgt);
    g.backward(losses.total);
    EXPECT_EQ(all_zero(model.sae.weight.grad), stage == 1) << "stage " << stage;
    for (auto* p : model.domain_head.parameters()) {
      EXPECT_EQ(all_zero(p->grad), stage < 3) << p->name << " stage " << stage;
    }
    EXPECT_FALSE(all_zero(model.encoder.embeddings.grad));
    EXPECT_EQ(losses.recon.has_value(), stage >= 2);
    EXPECT_EQ(losses.domain.has_value(), stage == 3);
    EXPECT_NEAR(losses.total.value().item(), losses.weighted_sum, 1e-10);

    const auto active = active_parameters(model, plan, stage);
    const auto params = model.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (params[k] == &model.sae.weight) EXPECT_EQ(active[k], stage >= 2);
    }
  }
}

TEST(Trainer, SameSeedGivesBitIdenticalParametersAndCheckpoint) {
  const auto a = tiny_run(5);
  const auto b = tiny_run(5);
  const auto pa = a.result.model.parameters();
  const auto pb = b.result.model.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t k = 0; k < pa.size(); ++k) EXPECT_EQ(pa[k]->value, pb[k]->value) << pa[k]->name;
  EXPECT_EQ(serialize(a.result.checkpoint), serialize(b.result.checkpoint));
  const auto c = tiny_run(6);
  EXPECT_NE(serialize(a.result.checkpoint), serialize(c.result.checkpoint));
}

TEST(Trainer, LogsComponentsAndCombinedLossIdentity) {
  const auto run = tiny_run(2);
  ASSERT_EQ(run.result.log.size(), 3u);
  for (const auto& e : run.result.log) {
    EXPECT_LT(e.combined_deviation, 1e-10);
    EXPECT_GT(e.steps, 0u);
    ASSERT_TRUE(e.selection_w_f1.has_value());
    EXPECT_EQ(e.recon != 0.0, e.stage >= 2);
    EXPECT_EQ(e.domain != 0.0, e.stage == 3);
  }
  EXPECT_EQ(run.result.log[0].learning_rate, 1e-3);
  EXPECT_NEAR(run.result.log[2].learning_rate, 1e-4, 1e-18);

  std::ostringstream out;
  write_log_jsonl(out, run.result.log);
  std::istringstream in(out.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("epoch").get<std::size_t>(), ++n);
    EXPECT_TRUE(j.contains("mmd") && j.contains("recon") && j.contains("domain"));
  }
  EXPECT_EQ(n, 3u);
}

TEST(Trainer, SelectsBestFinalStageEpoch) {
  auto cfg = tiny_config(4);
  cfg.train.epochs = 6;
  const auto d = prepare_data(cfg);
  const auto result = train(cfg, {&d.source.train, &d.target_pool, &d.target.valid});
  double best = -1.0;
  std::size_t best_epoch = 0;
  for (const auto& e : result.log) {
    ASSERT_TRUE(e.selection_w_f1.has_value());
    if (e.stage == 3 && *e.selection_w_f1 > best) {
      best = *e.selection_w_f1;
      best_epoch = e.epoch;
    }
  }
  EXPECT_EQ(result.best_epoch, best_epoch);
  EXPECT_EQ(result.checkpoint.best_epoch, best_epoch);
  EXPECT_EQ(result.checkpoint.selection_metric, best);
  EXPECT_EQ(result.checkpoint.stage, 3u);
  EXPECT_EQ(result.checkpoint.epoch, 6u);
}

TEST(Trainer, AlignmentOnlyVariantMatchesStandaloneLoop) {
  auto cfg = tiny_config(8);
  cfg.train.variant = Variant::kNoRecNoDcl;
  const auto d = prepare_data(cfg);
  const auto run = train(cfg, {&d.source.train, &d.target_pool, nullptr});

  // Independent loop over the label loss: same init, sampling protocol and optimizer.
  Model m(cfg.model, cfg.data.n_codes, cfg.data.n_labels, cfg.train.seed);
  std::vector<Parameter*> trained = m.encoder.parameters();
  for (auto* p : m.label_head.parameters()) trained.push_back(p);
  Adam adam(trained, cfg.train.adam_beta1, cfg.train.adam_beta2, cfg.train.adam_eps);
  Rng shuffle_rng(derive_seed(cfg.train.seed, "shuffle"));
  Rng target_rng(derive_seed(cfg.train.seed, "target"));
  std::vector<std::size_t> order(d.source.train.size()), torder(d.target_pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::iota(torder.begin(), torder.end(), std::size_t{0});
  std::size_t cursor = torder.size();
  for (std::size_t epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    const double lr = epoch > 2 ? 1e-4 : 1e-3;
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t b = 0; b < order.size(); b += cfg.train.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.train.batch_size);
      if (e - b < 2) continue;
      std::vector<const data::PatientRecord*> s, t;
      for (std::size_t i = b; i < e; ++i) s.push_back(&d.source.train.records[order[i]]);
      while (t.size() < s.size()) {
        if (cursor == torder.size()) {
          target_rng.shuffle(std::span<std::size_t>(torder));
          cursor = 0;
        }
        t.push_back(&d.target_pool.records[torder[cursor++]]);
      }
      ad::Graph g;
      ad::Var vs = m.encoder.encode_batch(g, s);
      ad::Var vt = m.encoder.encode_batch(g, t);
      const auto ll = label_loss(vs, m.label_head.probabilities(g, vs),
                                 label_matrix(s, cfg.data.n_labels), vt, cfg.loss.lambda1,
                                 cfg.mmd);
      g.backward(ll.total);
      adam.step(lr);
    }
  }
  const auto got = run.model.parameters();
  const auto want = m.parameters();
  for (std::size_t k = 0; k < got.size(); ++k) EXPECT_EQ(got[k]->value, want[k]->value) << got[k]->name;
}

TEST(Trainer, TargetLabelsAreNeverRead) {
  auto cfg = tiny_config(9);
  const auto d = prepare_data(cfg);
  data::Dataset labeled = d.target.valid;
  labeled.records.resize(cfg.train.n_target_unlabeled);
  const auto a = train(cfg, {&d.source.train, &d.target_pool, nullptr});
  const auto b = train(cfg, {&d.source.train, &labeled, nullptr});
  EXPECT_EQ(serialize(a.checkpoint), serialize(b.checkpoint));
  for (const auto& r : d.target_pool.records) EXPECT_TRUE(r.label.empty());
}

TEST(Trainer, RejectsEmptyDataAndBadSchedules) {
  auto cfg = tiny_config(1);
  const auto d = prepare_data(cfg);
  data::Dataset empty;
  EXPECT_THROW(train(cfg, {&empty, &d.target_pool, nullptr}), InputError);
  EXPECT_THROW(train(cfg, {&d.source.train, &empty, nullptr}), InputError);
  EXPECT_THROW(train(cfg, {nullptr, &d.target_pool, nullptr}), InputError);
  auto bad = cfg;
  bad.train.stage1_end = 3;
  bad.train.stage2_end = 2;
  EXPECT_THROW(train(bad, {&d.source.train, &d.target_pool, nullptr}), ConfigError);
  bad = cfg;
  bad.train.batch_size = 1;
  EXPECT_THROW(train(bad, {&d.source.train, &d.target_pool, nullptr}), ConfigError);
}

TEST(Trainer, DefaultConfigStageOneLossDecreases) {
  int decreased = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ExperimentConfig cfg;
    cfg.data.seed = cfg.train.seed = seed;
    cfg.train.epochs = cfg.train.stage1_end = cfg.train.stage2_end = 5;
    const auto d = prepare_data(cfg);
    const auto run = train(cfg, {&d.source.train, &d.target_pool, nullptr});
    if (run.log.back().loss < run.log.front().loss) ++decreased;
  }
  EXPECT_GE(decreased, 4);
}

TEST(Baselines, BaseHasNoSaeOrDomainHistory) {
  auto cfg = tiny_config(2);
  const auto d = prepare_data(cfg);
  const auto run =
      run_baseline(BaselineKind::kBase, cfg, d.source.train, d.target.train, &d.target.valid);
  EXPECT_EQ(run.checkpoint.variant, "base");
  Model model = restore_model(run.checkpoint);
  std::set<std::string> untouched;
  for (auto* p : model.sae.parameters()) untouched.insert(p->name);
  for (auto* p : model.domain_head.parameters()) untouched.insert(p->name);
  for (const auto& t : run.checkpoint.tensors) {
    if (untouched.count(t.name)) {
      EXPECT_TRUE(all_zero(t.adam_m) && all_zero(t.adam_v)) << t.name;
      EXPECT_EQ(t.adam_steps, 0u) << t.name;
    } else {
      EXPECT_GT(t.adam_steps, 0u) << t.name;
    }
  }
}

TEST(Baselines, OracleNeedsLabels) {
  auto cfg = tiny_config(2);
  const auto d = prepare_data(cfg);
  EXPECT_THROW(run_baseline(BaselineKind::kOracle, cfg, d.source.train, d.target_pool, nullptr),
               InputError);
  const auto run = run_baseline(BaselineKind::kOracle, cfg, d.source.train, d.target.train,
                                nullptr);
  EXPECT_EQ(run.checkpoint.variant, "oracle");
}

TEST(Inference, ShapesAndVocabularyCheck) {
  const auto run = tiny_run(7);
  const Tensor p = predict_target(run.result.checkpoint, run.data.target.test);
  EXPECT_EQ(p.shape(), (Shape{run.data.target.test.size(), run.config.data.n_labels}));
  for (double x : p.data()) EXPECT_TRUE(x > 0.0 && x < 1.0);
  data::Dataset other = run.data.target.test;
  other.n_codes = 150;
  EXPECT_THROW(predict_target(run.result.checkpoint, other), InputError);
}

TEST(Inference, DomainHeadIsNotOnThePredictionPath) {
  const auto run = tiny_run(7);
  Model model = restore_model(run.result.checkpoint);
  const Tensor before = predict_probabilities(model, run.data.target.test);
  for (auto* p : model.domain_head.parameters()) p->value.fill(0.0);
  EXPECT_EQ(predict_probabilities(model, run.data.target.test), before);
  EXPECT_EQ(before, predict_target(run.result.checkpoint, run.data.target.test));
}

TEST(CheckpointFormat, SerializeRoundTripIsByteIdentical) {
  const auto run = tiny_run(1);
  const std::string bytes = serialize(run.result.checkpoint);
  ASSERT_GE(bytes.size(), 8u);
  EXPECT_EQ(bytes.substr(0, 4), "OCKP");
  EXPECT_EQ(bytes.substr(4, 4), std::string("\x01\x00\x00\x00", 4));
  const Checkpoint back = deserialize(bytes);
  EXPECT_EQ(back, run.result.checkpoint);
  EXPECT_EQ(serialize(back), bytes);

  const auto dir = std::filesystem::temp_directory_path() / "orthocare_ckpt_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(back, (dir / "a.ckpt").string());
  save_checkpoint(load_checkpoint((dir / "a.ckpt").string()), (dir / "b.ckpt").string());
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));
  std::filesystem::remove_all(dir);
}

TEST(CheckpointFormat, RestoresModelAndConfig) {
  const auto run = tiny_run(1);
  const Model model = restore_model(run.result.checkpoint);
  const auto got = model.parameters();
  const auto want = run.result.model.parameters();
  for (std::size_t k = 0; k < got.size(); ++k) EXPECT_EQ(got[k]->value, want[k]->value);
  EXPECT_EQ(checkpoint_config(run.result.checkpoint).hash(), run.config.hash());
  EXPECT_EQ(run.result.checkpoint.config_hash, run.config.hash());
  const AdamState s = restore_adam(run.result.checkpoint);
  EXPECT_EQ(s.m.size(), got.size());
}

TEST(CheckpointFormat, RejectsCorruptInput) {
  const auto run = tiny_run(1);
  const std::string bytes = serialize(run.result.checkpoint);
  EXPECT_THROW(deserialize(bytes.substr(0, bytes.size() - 3)), InputError);
  EXPECT_THROW(deserialize(bytes + "x"), InputError);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize(bad), InputError);
  bad = bytes;
  bad[4] = 9;
  EXPECT_THROW(deserialize(bad), InputError);
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/x.ckpt"), IoError);

  Checkpoint renamed = run.result.checkpoint;
  renamed.tensors[0].name = "other";
  EXPECT_THROW(restore_model(renamed), InputError);
  Checkpoint shorter = run.result.checkpoint;
  shorter.tensors.pop_back();
  EXPECT_THROW(restore_model(shorter), InputError);
}

}  // namespace
}  // namespace orthocare
