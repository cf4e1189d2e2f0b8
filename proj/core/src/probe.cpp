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

#include "orthocare/probe.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "orthocare/alignment.hpp"
#include "orthocare/autodiff.hpp"
#include "orthocare/error.hpp"
#include "orthocare/model.hpp"
#include "orthocare/optim.hpp"
#include "orthocare/ortho.hpp"
#include "orthocare/sae.hpp"
#include "orthocare/trainer.hpp"

namespace orthocare {
namespace {

void check_rows(const Tensor& features, const Tensor& targets, const char* what) {
  if (features.rank() != 2 || targets.rank() != 2 || features.rows() != targets.rows() ||
      features.rows() == 0) {
    throw ShapeError(std::string(what) + ": features " + shape_string(features.shape()) +
                     " vs targets " + shape_string(targets.shape()));
  }
}

Tensor row_subset(const Tensor& t, const std::vector<std::size_t>& rows) {
  Tensor out({rows.size(), t.cols()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) out.at(i, j) = t.at(rows[i], j);
  }
  return out;
}

Tensor col_subset(const Tensor& t, const std::vector<std::size_t>& cols) {
  Tensor out({t.rows(), cols.size()});
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) out.at(i, j) = t.at(i, cols[j]);
  }
  return out;
}

Tensor stack(const Tensor& a, const Tensor& b) {
  Tensor out({a.rows() + b.rows(), a.cols()});
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(), out.data().begin() + static_cast<long>(a.size()));
  return out;
}

bool both_classes(const Tensor& t, std::size_t col) {
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < t.rows(); ++i) (t.at(i, col) > 0.5 ? pos : neg) = true;
  return pos && neg;
}

data::Dataset head(const data::Dataset& ds, std::size_t n) {
  data::Dataset out = ds;
  if (out.records.size() > n) out.records.resize(n);
  return out;
}

}  // namespace

ProbeFit linear_probe(const Tensor& features, const Tensor& targets, const ProbeConfig& cfg) {
  check_rows(features, targets, "linear_probe");
  for (std::size_t j = 0; j < targets.cols(); ++j) {
    if (!both_classes(targets, j)) {
      throw InputError("linear_probe: target column " + std::to_string(j) +
                       " has a single class");
    }
  }
  Parameter weight("probe.weight", Tensor({targets.cols(), features.cols()}));
  Parameter bias("probe.bias", Tensor({targets.cols()}));
  Adam adam({&weight, &bias});
  ProbeFit fit;
  for (std::size_t step = 0; step <= cfg.steps; ++step) {
    ad::Graph g;
    ad::Var w = g.parameter(weight);
    ad::Var logits =
        ad::add_row_bias(ad::matmul(g.constant(features), ad::transpose(w)), g.parameter(bias));
    ad::Var loss = ad::add(bce(ad::sigmoid(logits), targets), ad::scale(ad::sq_l2_norm(w), cfg.l2));
    fit.final_loss = loss.value().item();
    if (step == cfg.steps) break;  // last pass only measures the loss
    g.backward(loss);
    adam.step(cfg.learning_rate);
  }
  fit.weight = weight.value;
  fit.bias = bias.value;
  return fit;
}

Tensor probe_probabilities(const ProbeFit& fit, const Tensor& features) {
  if (features.rank() != 2 || features.cols() != fit.weight.cols()) {
    throw ShapeError("probe: features " + shape_string(features.shape()) + " vs weight " +
                     shape_string(fit.weight.shape()));
  }
  Tensor out({features.rows(), fit.weight.rows()});
  for (std::size_t i = 0; i < features.rows(); ++i) {
    for (std::size_t j = 0; j < fit.weight.rows(); ++j) {
      double z = fit.bias[j];
      for (std::size_t k = 0; k < features.cols(); ++k) z += fit.weight.at(j, k) * features.at(i, k);
      out.at(i, j) = 1.0 / (1.0 + std::exp(-z));
    }
  }
  return out;
}

double probe_accuracy(const ProbeFit& fit, const Tensor& features, const Tensor& targets) {
  check_rows(features, targets, "probe_accuracy");
  const Tensor p = probe_probabilities(fit, features);
  if (p.shape() != targets.shape()) {
    throw ShapeError("probe_accuracy: predictions " + shape_string(p.shape()) + " vs targets " +
                     shape_string(targets.shape()));
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < p.size(); ++i) correct += (p[i] > 0.5) == (targets[i] > 0.5);
  return static_cast<double>(correct) / static_cast<double>(p.size());
}

double mean_abs_row_cosine(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols() ||
      (b.rows() != a.rows() && b.rows() != 1) || a.rows() == 0) {
    throw ShapeError("row cosine: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const std::size_t r = b.rows() == 1 ? 0 : i;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < a.cols(); ++k) {
      dot += a.at(i, k) * b.at(r, k);
      na += a.at(i, k) * a.at(i, k);
      nb += b.at(r, k) * b.at(r, k);
    }
    if (na == 0.0 || nb == 0.0) throw DomainError("row cosine: zero weight row");
    total += std::abs(dot) / std::sqrt(na * nb);
  }
  return total / static_cast<double>(a.rows());
}

Tensor residual_rows(const Checkpoint& checkpoint, const Tensor& v) {
  if (checkpoint.stage < 2) {
    throw InputError("probe: checkpoint reached stage " + std::to_string(checkpoint.stage) +
                     ", residuals need a trained dictionary");
  }
  const ExperimentConfig cfg = checkpoint_config(checkpoint);
  const VariantPlan plan = plan_for(cfg.train.variant, cfg.loss);
  if (plan.weights.lambda2 == 0.0) {
    throw InputError("probe: variant " + variant_name(cfg.train.variant) +
                     " does not train the dictionary");
  }
  const Tensor& w = checkpoint.tensor("sae.weight").value;
  if (v.rank() != 2 || v.cols() != w.cols()) {
    throw ShapeError("residual_rows: " + shape_string(v.shape()) + " vs dictionary " +
                     shape_string(w.shape()));
  }
  const Tensor m = plan.project_euclidean
                       ? Tensor::identity(w.cols())
                       : metric(w);
  Tensor z(v.shape());
  Tensor row({v.cols()});
  for (std::size_t i = 0; i < v.rows(); ++i) {
    for (std::size_t j = 0; j < v.cols(); ++j) row[j] = v.at(i, j);
    const ProjectionResult p = project(row, sae_decode(w, sae_encode(w, row)), m, cfg.train.epsilon);
    for (std::size_t j = 0; j < v.cols(); ++j) z.at(i, j) = p.z[j];
  }
  return z;
}

ProbeResult probe_cosines(const Checkpoint& base, const Checkpoint& full,
                          const data::Dataset& source, const data::Dataset& target,
                          const ProbeConfig& cfg) {
  Model base_model = restore_model(base);
  Model full_model = restore_model(full);
  if (base_model.n_codes() != full_model.n_codes() ||
      base_model.n_labels() != full_model.n_labels()) {
    throw InputError("probe: base and full checkpoints disagree on vocabulary or labels");
  }
  const data::Dataset src = head(source, cfg.n_records);
  const data::Dataset tgt = head(target, cfg.n_records);
  if (src.size() < 2 || tgt.size() < 2) throw InputError("probe: need >= 2 records per domain");

  struct Features {
    Tensor v0, v, z, labels;
  };
  auto features = [&](const data::Dataset& ds) {
    Features f;
    f.v0 = representations(base_model, ds);
    f.v = representations(full_model, ds);
    f.z = residual_rows(full, f.v);
    f.labels = label_tensor(ds);
    return f;
  };
  const Features fs = features(src), ft = features(tgt);

  ProbeResult result;
  for (std::size_t j = 0; j < fs.labels.cols(); ++j) {
    if (both_classes(fs.labels, j) && both_classes(ft.labels, j)) result.labels.push_back(j);
  }
  if (result.labels.empty()) throw InputError("probe: no label has both classes in both domains");

  Tensor domain({src.size() + tgt.size(), 1});
  for (std::size_t i = src.size(); i < domain.rows(); ++i) domain.at(i, 0) = 1.0;
  const Tensor merged_v0 = stack(fs.v0, ft.v0);
  const Tensor w_d_v0 = linear_probe(merged_v0, domain, cfg).weight;

  auto column = [&](const Features& f) {
    const Tensor y = col_subset(f.labels, result.labels);
    const Tensor c_v0 = linear_probe(f.v0, y, cfg).weight;
    ProbeColumn c;
    c.class_vs_domain_v0 = mean_abs_row_cosine(c_v0, w_d_v0);
    c.v0_vs_z = mean_abs_row_cosine(c_v0, linear_probe(f.z, y, cfg).weight);
    c.v0_vs_v = mean_abs_row_cosine(c_v0, linear_probe(f.v, y, cfg).weight);
    return c;
  };
  result.source = column(fs);
  result.target = column(ft);
  result.mean = {0.5 * (result.source.class_vs_domain_v0 + result.target.class_vs_domain_v0),
                 0.5 * (result.source.v0_vs_z + result.target.v0_vs_z),
                 0.5 * (result.source.v0_vs_v + result.target.v0_vs_v)};

  std::vector<std::size_t> even, odd;
  for (std::size_t i = 0; i < domain.rows(); ++i) (i % 2 == 0 ? even : odd).push_back(i);
  auto held_out = [&](const Tensor& x) {
    const ProbeFit fit = linear_probe(row_subset(x, even), row_subset(domain, even), cfg);
    return probe_accuracy(fit, row_subset(x, odd), row_subset(domain, odd));
  };
  result.domain_accuracy_v = held_out(stack(fs.v, ft.v));
  result.domain_accuracy_z = held_out(stack(fs.z, ft.z));
  return result;
}

std::string probe_json(const ProbeResult& r) {
  using nlohmann::ordered_json;
  auto column = [](const ProbeColumn& c) {
    return ordered_json{{"cos_class_v0_domain_v0", c.class_vs_domain_v0},
                        {"cos_class_v0_class_z", c.v0_vs_z},
                        {"cos_class_v0_class_v", c.v0_vs_v}};
  };
  ordered_json j;
  j["version"] = 1;
  j["source"] = column(r.source);
  j["target"] = column(r.target);
  j["mean"] = column(r.mean);
  j["domain_accuracy_v"] = r.domain_accuracy_v;
  j["domain_accuracy_z"] = r.domain_accuracy_z;
  j["labels"] = r.labels;
  return j.dump(2) + "\n";
}

}  // namespace orthocare
