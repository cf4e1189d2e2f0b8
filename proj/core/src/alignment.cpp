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

#include "orthocare/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "orthocare/error.hpp"

namespace orthocare {

void MmdConfig::validate() const {
  if (kernel_num < 1) throw ConfigError("mmd: kernel_num must be >= 1");
  if (!(kernel_mul > 1.0)) throw ConfigError("mmd: kernel_mul must be > 1");
  if (bandwidth && !(*bandwidth > 0.0)) throw ConfigError("mmd: bandwidth must be > 0");
}

void LossWeights::validate() const {
  for (double w : {lambda_label, lambda1, lambda2, lambda3, gamma}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss weights must be nonnegative");
  }
}

double median_bandwidth(const Tensor& sq_dists) {
  const std::size_t n = sq_dists.rows();
  std::vector<double> values;
  values.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) values.push_back(sq_dists.at(i, j));
  }
  if (values.empty()) return 1.0;
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  double median = *mid;
  if (values.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(values.begin(), mid));
  }
  if (median > 0.0) return median;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  return mean > 0.0 ? mean : 1.0;
}

namespace {

bool lexicographically_less(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return a.rows() < b.rows();
  return std::lexicographical_compare(a.data().begin(), a.data().end(), b.data().begin(),
                                      b.data().end());
}

}  // namespace

ad::Var mmd(const ad::Var& a_in, const ad::Var& b_in, const MmdConfig& cfg) {
  cfg.validate();
  const auto& sa = a_in.shape();
  const auto& sb = b_in.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[1]) {
    throw ShapeError("mmd: sample sets " + shape_string(sa) + " and " + shape_string(sb) +
                     " must be matrices with equal columns");
  }
  if (sa[0] < 2 || sb[0] < 2) {
    throw InputError("mmd: each sample set needs at least 2 rows, got " +
                     std::to_string(sa[0]) + " and " + std::to_string(sb[0]));
  }
  // A canonical operand order makes mmd(a, b) and mmd(b, a) the same computation.
  const bool swap = lexicographically_less(b_in.value(), a_in.value());
  const ad::Var& a = swap ? b_in : a_in;
  const ad::Var& b = swap ? a_in : b_in;
  const std::size_t na = a.shape()[0];
  const std::size_t nb = b.shape()[0];
  const std::size_t n = na + b.shape()[0];

  ad::Graph& g = *a.graph();
  ad::Var d = ad::pairwise_sq_dists(ad::concat(a, b));
  const double base =
      cfg.bandwidth ? *cfg.bandwidth : median_bandwidth(ad::stop_gradient(d).value());

  ad::Var k;
  for (int i = 0; i < cfg.kernel_num; ++i) {
    const double bw = base * std::pow(cfg.kernel_mul, i - cfg.kernel_num / 2);
    ad::Var term = ad::exp(ad::scale(d, -1.0 / bw));
    k = i == 0 ? term : ad::add(k, term);
  }
  // sum_ij w_i w_j K_ij with w = (1/na, ..., -1/nb, ...).
  Tensor w({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = i < na ? 1.0 / static_cast<double>(na) : -1.0 / static_cast<double>(nb);
    for (std::size_t j = 0; j < n; ++j) {
      const double wj =
          j < na ? 1.0 / static_cast<double>(na) : -1.0 / static_cast<double>(nb);
      w.at(i, j) = wi * wj;
    }
  }
  return ad::inner(k, g.constant(std::move(w)));
}

double mmd(const Tensor& a, const Tensor& b, const MmdConfig& cfg) {
  ad::Graph g;
  return mmd(g.constant(a), g.constant(b), cfg).value().item();
}

ad::Var bce(const ad::Var& probabilities, const Tensor& labels) {
  if (probabilities.shape() != labels.shape()) {
    throw ShapeError("bce: probabilities " + shape_string(probabilities.shape()) +
                     " vs labels " + shape_string(labels.shape()));
  }
  ad::Graph& g = *probabilities.graph();
  ad::Var p = ad::clamp(probabilities, 1e-9, 1.0 - 1e-9);
  Tensor neg(labels.shape());
  for (std::size_t i = 0; i < labels.size(); ++i) neg[i] = 1.0 - labels[i];
  ad::Var ll = ad::add(ad::mul(g.constant(labels), ad::log(p)),
                       ad::mul(g.constant(std::move(neg)),
                               ad::log(ad::add_scalar(ad::scale(p, -1.0), 1.0))));
  return ad::scale(ad::mean(ll), -1.0);
}

LabelLoss label_loss(const ad::Var& source_repr, const ad::Var& source_probs,
                     const Tensor& source_labels, const ad::Var& target_repr, double lambda1,
                     const MmdConfig& cfg) {
  LabelLoss out;
  out.bce = bce(source_probs, source_labels);
  out.mmd = mmd(source_repr, target_repr, cfg);
  ad::Var denom =
      ad::add_scalar(ad::sq_l2_norm(ad::stop_gradient(ad::col_mean(source_repr))), 1e-12);
  out.total = ad::add(out.bce, ad::scale(ad::div(out.mmd, denom), lambda1));
  return out;
}

Tensor label_matrix(RecordBatch records, std::size_t n_labels) {
  Tensor y({records.size(), n_labels});
  for (std::size_t b = 0; b < records.size(); ++b) {
    const auto& label = records[b]->label;
    if (label.size() != n_labels) {
      throw InputError("label vector of length " + std::to_string(label.size()) +
                       ", expected " + std::to_string(n_labels));
    }
    for (std::size_t j = 0; j < n_labels; ++j) y.at(b, j) = label[j];
  }
  return y;
}

}  // namespace orthocare
