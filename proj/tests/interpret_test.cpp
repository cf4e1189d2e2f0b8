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
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "orthocare/checkpoint.hpp"
#include "orthocare/error.hpp"
#include "orthocare/interpret.hpp"
#include "orthocare/sae.hpp"
#include "orthocare/trainer.hpp"
#include "test_util.hpp"

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

struct Fixture {
  ExperimentData data;
  Checkpoint checkpoint;
};

const Fixture& trained() {
  static const Fixture f = [] {
    const auto cfg = tiny_config(4);
    Fixture out{prepare_data(cfg), {}};
    out.checkpoint = train(cfg, {&out.data.source.train, &out.data.target_pool,
                                 &out.data.target.valid})
                         .checkpoint;
    return out;
  }();
  return f;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Label probabilities from the decoded code, by explicit loops.
std::vector<double> loop_probabilities(const Checkpoint& ck, const std::vector<double>& s) {
  const Tensor& w = ck.tensor("sae.weight").value;
  const Tensor& lw = ck.tensor("label_head.weight").value;
  const Tensor& lb = ck.tensor("label_head.bias").value;
  std::vector<double> v_hat(w.cols(), 0.0);
  for (std::size_t k = 0; k < w.rows(); ++k) {
    for (std::size_t i = 0; i < w.cols(); ++i) v_hat[i] += w.at(k, i) * s[k];
  }
  std::vector<double> p(lw.rows());
  for (std::size_t j = 0; j < lw.rows(); ++j) {
    double z = lb[j];
    for (std::size_t i = 0; i < lw.cols(); ++i) z += lw.at(j, i) * v_hat[i];
    p[j] = sigmoid(z);
  }
  return p;
}

std::vector<double> loop_code(const Checkpoint& ck, const Tensor& v) {
  const Tensor& w = ck.tensor("sae.weight").value;
  std::vector<double> s(w.rows(), 0.0);
  for (std::size_t k = 0; k < w.rows(); ++k) {
    double a = 0.0;
    for (std::size_t i = 0; i < w.cols(); ++i) a += w.at(k, i) * v[i];
    s[k] = std::max(0.0, a);
  }
  return s;
}

// Minimal well-formedness check: balanced tags, quoted attributes.
bool well_formed_xml(const std::string& text) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  bool root_seen = false;
  while ((i = text.find('<', i)) != std::string::npos) {
    const std::size_t end = text.find('>', i);
    if (end == std::string::npos) return false;
    std::string tag = text.substr(i + 1, end - i - 1);
    i = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;
    if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return false;
    if (tag[0] == '/') {
      if (stack.empty() || stack.back() != tag.substr(1)) return false;
      stack.pop_back();
      continue;
    }
    const bool self_closing = tag.back() == '/';
    const std::string name = tag.substr(0, tag.find_first_of(" /"));
    if (stack.empty() && root_seen) return false;
    root_seen = true;
    if (!self_closing) stack.push_back(name);
  }
  return root_seen && stack.empty();
}

struct HorizontalRule {
  double y;
  bool dashed;
};

std::vector<HorizontalRule> horizontal_rules(const std::string& svg) {
  static const std::regex line(R"re(<line x1="([-0-9.]+)" y1="([-0-9.]+)" x2="([-0-9.]+)" y2="([-0-9.]+)"([^>]*)/>)re");
  std::vector<HorizontalRule> out;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), line); it != std::sregex_iterator();
       ++it) {
    const auto& m = *it;
    if (m[2].str() == m[4].str() && m[1].str() != m[3].str()) {
      out.push_back({std::stod(m[2].str()), m[5].str().find("stroke-dasharray") != std::string::npos});
    }
  }
  return out;
}

TEST(TopKDims, DocumentedExamples) {
  EXPECT_EQ(top_k_dims(Tensor::vector({0, 3, 1, 3}), 2), (std::vector<std::size_t>{1, 3}));
  EXPECT_TRUE(top_k_dims(Tensor::vector({0, 0, 0}), 3).empty());
  EXPECT_EQ(top_k_dims(Tensor::vector({0.1, 0.5, 0.2}), 5), (std::vector<std::size_t>{1, 2, 0}));
}

TEST(Ablate, ZeroesExactlyOneCoordinate) {
  EXPECT_EQ(ablate(Tensor::vector({1, 2}), 0), Tensor::vector({0, 2}));
  const Tensor s = Tensor::vector({0, 4, 5});
  EXPECT_EQ(ablate(s, 0), s);
  const Tensor t = ablate(s, 2);
  std::size_t differing = 0;
  for (std::size_t i = 0; i < s.size(); ++i) differing += s[i] != t[i];
  EXPECT_EQ(differing, 1u);
  EXPECT_THROW(ablate(s, 3), InputError);
}

TEST(Ablate, DecoderChangeIsLocalToTheAblatedRow) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor w = testing::random_tensor(gen, {16, 8});
    const Tensor s = testing::random_tensor(gen, {16}, 0.0, 2.0);
    const std::size_t k = static_cast<std::size_t>(trial) % 16;
    const Tensor a = sae_decode(w, s), b = sae_decode(w, ablate(s, k));
    double diff = 0.0, row = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
      diff += (a[i] - b[i]) * (a[i] - b[i]);
      row += w.at(k, i) * w.at(k, i);
    }
    EXPECT_NEAR(std::sqrt(diff), s[k] * std::sqrt(row), 1e-12 * (1.0 + s[k] * std::sqrt(row)));
  }
}

TEST(RemoveCode, DropsOccurrencesAndEmptiedVisits) {
  data::PatientRecord r;
  r.visits = {{1, 4}, {4}, {2, 4, 7}};
  r.label = {1, 0};
  const auto out = remove_code(r, 4);
  EXPECT_EQ(out.visits, (std::vector<std::vector<std::uint32_t>>{{1}, {2, 7}}));
  EXPECT_EQ(out.label, r.label);
  EXPECT_EQ(remove_code(r, 9), r);
}

TEST(Interpreter, LabelDeltaMatchesLoopOracle) {
  const auto& f = trained();
  Interpreter interp(f.checkpoint);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& rec = f.data.target.test.records[i];
    const Tensor v = interp.representation(rec);
    const auto s = loop_code(f.checkpoint, v);
    const Tensor s_lib = interp.sparse_code(v);
    for (std::size_t k = 0; k < s.size(); ++k) EXPECT_NEAR(s_lib[k], s[k], 1e-12);
    for (std::size_t dim = 0; dim < s.size(); ++dim) {
      auto ablated = s;
      ablated[dim] = 0.0;
      const auto p = loop_probabilities(f.checkpoint, s);
      const auto q = loop_probabilities(f.checkpoint, ablated);
      const Tensor delta = interp.delta_prob_label(rec, dim);
      ASSERT_EQ(delta.size(), p.size());
      for (std::size_t j = 0; j < p.size(); ++j) {
        EXPECT_NEAR(delta[j], std::abs(p[j] - q[j]), 1e-12);
        EXPECT_GE(delta[j], 0.0);
        EXPECT_LE(delta[j], 1.0);
      }
    }
  }
}

TEST(Interpreter, RepresentationMatchesBatchPath) {
  const auto& f = trained();
  Interpreter interp(f.checkpoint);
  Model model = restore_model(f.checkpoint);
  data::Dataset few = f.data.target.test;
  few.records.resize(4);
  const Tensor batch = representations(model, few);
  for (std::size_t i = 0; i < 4; ++i) {
    const Tensor v = interp.representation(few.records[i]);
    for (std::size_t j = 0; j < v.size(); ++j) EXPECT_NEAR(v[j], batch.at(i, j), 1e-12);
  }
  const Tensor empty = interp.representation(data::PatientRecord{});
  EXPECT_TRUE(empty.all_finite());
}

TEST(Interpreter, ZeroActivationDimensionIsInert) {
  const auto& f = trained();
  Interpreter interp(f.checkpoint);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& rec = f.data.target.test.records[i];
    const Tensor s = interp.sparse_code(interp.representation(rec));
    for (std::size_t dim = 0; dim < s.size(); ++dim) {
      if (s[dim] != 0.0) continue;
      ++checked;
      const Tensor delta = interp.delta_prob_label(rec, dim);
      for (double x : delta.data()) EXPECT_EQ(x, 0.0);
      EXPECT_EQ(interp.delta_prob_domain(rec, dim, {}).dimension, 0.0);
    }
  }
  EXPECT_GT(checked, 0u);
}

TEST(Interpreter, DomainImpactOfAbsentCodeIsZero) {
  const auto& f = trained();
  Interpreter interp(f.checkpoint);
  const auto& rec = f.data.target.test.records[0];
  std::vector<bool> present(200, false);
  for (const auto& v : rec.visits) {
    for (auto c : v) present[c] = true;
  }
  std::vector<std::size_t> absent, there;
  for (std::size_t c = 0; c < 200; ++c) (present[c] ? there : absent).push_back(c);
  const auto top = top_k_dims(interp.sparse_code(interp.representation(rec)), 1);
  ASSERT_FALSE(top.empty());
  const auto dd = interp.delta_prob_domain(rec, top[0], absent);
  for (double x : dd.per_code) EXPECT_EQ(x, 0.0);

  const auto hits = interp.delta_prob_domain(rec, top[0], there);
  ASSERT_EQ(hits.per_code.size(), there.size());
  Model model = restore_model(f.checkpoint);
  const Tensor m = metric(f.checkpoint.tensor("sae.weight").value);
  auto domain_p = [&](const data::PatientRecord& r) {
    const Tensor v = interp.representation(r);
    const Tensor s = sae_encode(model.sae.weight.value, v);
    const auto proj = project(v, sae_decode(model.sae.weight.value, s), m, 1e-6);
    ad::Graph g;
    return model.domain_head.target_probability(g, g.constant(proj.z.reshaped({1, v.size()})))
        .value()[0];
  };
  const double base = domain_p(rec);
  for (std::size_t i = 0; i < there.size(); ++i) {
    EXPECT_NEAR(hits.per_code[i], std::abs(base - domain_p(remove_code(rec, there[i]))), 1e-12);
    EXPECT_LE(hits.per_code[i], 1.0);
  }
}

TEST(Interpreter, RequiresTrainedStages) {
  Checkpoint ck = trained().checkpoint;
  const auto& rec = trained().data.target.test.records[0];
  ck.stage = 1;
  Interpreter early(ck);
  EXPECT_THROW(early.delta_prob_label(rec, 0), InputError);
  ck.stage = 2;
  Interpreter mid(ck);
  EXPECT_NO_THROW(mid.delta_prob_label(rec, 0));
  EXPECT_THROW(mid.delta_prob_domain(rec, 0, {}), InputError);
  EXPECT_THROW(quadrant_report(ck, trained().data.target.test.records, AblationConfig{}),
               InputError);
}

Checkpoint with_variant(Checkpoint ck, Variant v) {
  ExperimentConfig cfg = checkpoint_config(ck);
  cfg.train.variant = v;
  ck.config_text = cfg.to_text();
  ck.config_hash = cfg.hash();
  ck.variant = variant_name(v);
  return ck;
}

TEST(Interpreter, RequiresVariantThatTrainsTheModules) {
  const auto& rec = trained().data.target.test.records[0];
  Interpreter no_dcl(with_variant(trained().checkpoint, Variant::kNoDcl));
  EXPECT_NO_THROW(no_dcl.delta_prob_label(rec, 0));
  EXPECT_THROW(no_dcl.delta_prob_domain(rec, 0, {}), InputError);
  Interpreter base(with_variant(trained().checkpoint, Variant::kBase));
  EXPECT_THROW(base.delta_prob_label(rec, 0), InputError);

  Checkpoint tampered = trained().checkpoint;
  tampered.config_hash ^= 1;
  EXPECT_THROW(Interpreter{tampered}, InputError);
}

TEST(Interpreter, LabelDeltaIsPermutationEquivariant) {
  const auto& f = trained();
  Checkpoint permuted = f.checkpoint;
  const std::vector<std::size_t> perm{5, 2, 7, 0, 3, 6, 1, 4};
  for (auto& t : permuted.tensors) {
    if (t.name == "label_head.weight") {
      const Tensor w = t.value;
      for (std::size_t j = 0; j < perm.size(); ++j) {
        for (std::size_t i = 0; i < w.cols(); ++i) t.value.at(j, i) = w.at(perm[j], i);
      }
    } else if (t.name == "label_head.bias") {
      const Tensor b = t.value;
      for (std::size_t j = 0; j < perm.size(); ++j) t.value[j] = b[perm[j]];
    }
  }
  Interpreter a(f.checkpoint), b(permuted);
  const auto& rec = f.data.target.test.records[3];
  for (std::size_t dim = 0; dim < 16; ++dim) {
    const Tensor da = a.delta_prob_label(rec, dim), db = b.delta_prob_label(rec, dim);
    for (std::size_t j = 0; j < perm.size(); ++j) EXPECT_EQ(db[j], da[perm[j]]);
  }
}

std::vector<CodeAttribution> attributions(const std::vector<double>& impact, double label_delta) {
  std::vector<CodeAttribution> out;
  for (std::size_t i = 0; i < impact.size(); ++i) {
    out.push_back({i, label_delta * static_cast<double>(i % 2), impact[i],
                   DomainClass::kUnannotated, std::nullopt});
  }
  return out;
}

TEST(AnnotateCodes, TenCodesAreAllAnnotated) {
  auto codes = attributions({0.1, 0.9, 0.3, 0.7, 0.5, 0.2, 0.8, 0.4, 0.6, 0.0}, 0.2);
  annotate_codes(codes, AblationConfig{});
  std::size_t sensitive = 0, insensitive = 0;
  for (const auto& c : codes) {
    ASSERT_TRUE(c.quadrant.has_value());
    const bool is_sensitive = c.domain_impact >= 0.5;
    EXPECT_EQ(c.domain_class, is_sensitive ? DomainClass::kSensitive : DomainClass::kInsensitive);
    sensitive += is_sensitive;
    insensitive += !is_sensitive;
    const bool high = c.label_delta > 0.05;
    const Quadrant want = high ? (is_sensitive ? Quadrant::kHH : Quadrant::kHL)
                               : (is_sensitive ? Quadrant::kLH : Quadrant::kLL);
    EXPECT_EQ(*c.quadrant, want);
  }
  EXPECT_EQ(sensitive, 5u);
  EXPECT_EQ(insensitive, 5u);
}

TEST(AnnotateCodes, MiddleCodesStayUnannotated) {
  auto codes = attributions({0.1, 0.9, 0.3, 0.7, 0.5, 0.2, 0.8}, 0.2);
  AblationConfig cfg;
  cfg.domain_rank_n = 2;
  annotate_codes(codes, cfg);
  std::vector<DomainClass> got;
  for (const auto& c : codes) got.push_back(c.domain_class);
  using D = DomainClass;
  EXPECT_EQ(got, (std::vector<D>{D::kInsensitive, D::kSensitive, D::kUnannotated, D::kUnannotated,
                                 D::kUnannotated, D::kInsensitive, D::kSensitive}));
  auto one = attributions({0.4}, 0.2);
  annotate_codes(one, cfg);
  EXPECT_EQ(one[0].domain_class, DomainClass::kUnannotated);
  EXPECT_FALSE(one[0].quadrant.has_value());
}

TEST(QuadrantReport, PartitionIsExhaustiveAndDeterministic) {
  const auto& f = trained();
  std::vector<data::PatientRecord> records(f.data.target.test.records.begin(),
                                           f.data.target.test.records.begin() + 6);
  const AblationConfig cfg;
  const auto report = quadrant_report(f.checkpoint, records, cfg);
  ASSERT_EQ(report.patients.size(), 6u);
  for (const auto& p : report.patients) {
    EXPECT_LE(p.dimensions.size(), cfg.top_k);
    for (const auto& d : p.dimensions) {
      EXPECT_GT(d.activation, 0.0);
      EXPECT_GE(d.domain_delta, 0.0);
      EXPECT_LE(d.domain_delta, 1.0);
      EXPECT_LE(d.codes.size(), cfg.max_codes_per_dim);
      std::size_t annotated = 0, counted = 0;
      for (const auto& c : d.codes) {
        EXPECT_GT(c.label_delta, 0.0);
        EXPECT_LE(c.label_delta, 1.0);
        EXPECT_EQ(c.quadrant.has_value(), c.domain_class != DomainClass::kUnannotated);
        annotated += c.quadrant.has_value();
      }
      for (auto n : d.quadrant_counts) counted += n;
      EXPECT_EQ(counted, annotated);
      for (std::size_t i = 1; i < d.codes.size(); ++i) {
        EXPECT_GE(d.codes[i - 1].label_delta, d.codes[i].label_delta);
      }
    }
  }
  EXPECT_EQ(report_json(report), report_json(quadrant_report(f.checkpoint, records, cfg)));

  const auto json = nlohmann::json::parse(report_json(report));
  EXPECT_EQ(json["version"], kReportVersion);
  EXPECT_EQ(json["patients"].size(), 6u);
}

TEST(EmitPlots, EmptyReportWritesValidFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "orthocare_interpret_empty";
  std::filesystem::remove_all(dir);
  InterpretationReport report;
  const auto files = emit_plots(report, dir.string());
  ASSERT_EQ(files.size(), 3u);
  for (const auto& path : files) {
    std::ifstream in(path);
    std::stringstream text;
    text << in.rdbuf();
    if (path.ends_with(".svg")) {
      EXPECT_TRUE(well_formed_xml(text.str())) << path;
    } else {
      EXPECT_EQ(nlohmann::json::parse(text.str())["patients"].size(), 0u);
    }
  }
  std::filesystem::remove_all(dir);
}

TEST(EmitPlots, BarChartHasOneDashedThresholdRule) {
  const auto& f = trained();
  std::vector<data::PatientRecord> records(f.data.target.test.records.begin(),
                                           f.data.target.test.records.begin() + 3);
  const auto report = quadrant_report(f.checkpoint, records, AblationConfig{});
  const auto dir = std::filesystem::temp_directory_path() / "orthocare_interpret_plots";
  std::filesystem::remove_all(dir);
  const auto files = emit_plots(report, dir.string());
  EXPECT_EQ(files.size(), 3u + 2u * records.size());
  for (const auto& path : files) {
    if (!path.ends_with(".svg")) continue;
    std::ifstream in(path);
    std::stringstream text;
    text << in.rdbuf();
    EXPECT_TRUE(well_formed_xml(text.str())) << path;
  }

  // Bar heights are scaled to the axis maximum; the rule must sit where a bar
  // of height label_threshold would end.
  const std::string svg = bar_chart_svg(report, 0);
  const auto rules = horizontal_rules(svg);
  ASSERT_EQ(rules.size(), 1u);
  EXPECT_TRUE(rules[0].dashed);
  double y_max = 0.05;
  for (const auto& d : report.patients[0].dimensions) {
    for (const auto& c : d.codes) y_max = std::max(y_max, c.label_delta);
  }
  y_max *= 1.1;
  EXPECT_NEAR(rules[0].y, 30.0 + 310.0 * (1.0 - 0.05 / y_max), 0.01);
  EXPECT_EQ(horizontal_rules(bar_chart_svg(InterpretationReport{})).size(), 1u);
  EXPECT_THROW(bar_chart_svg(report, 99), InputError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace orthocare
