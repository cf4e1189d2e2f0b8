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

#include "orthocare/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "orthocare/error.hpp"

namespace orthocare {

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  const std::size_t n = scores.size();
  if (labels.size() != n) throw InputError("auroc: score and label counts differ");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Average 1-based ranks over runs of tied scores.
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }
  double pos = 0, rank_sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i]) {
      pos += 1;
      rank_sum += rank[i];
    }
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0 || neg == 0) throw InputError("auroc: needs both positive and negative labels");
  return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

MetricReport compute_metrics(const Tensor& probabilities, const Tensor& labels, std::size_t k,
                             double threshold) {
  if (probabilities.shape() != labels.shape() || probabilities.rank() != 2) {
    throw InputError("compute_metrics: probabilities " + shape_string(probabilities.shape()) +
                     " vs labels " + shape_string(labels.shape()));
  }
  if (k == 0) throw ConfigError("compute_metrics: k must be >= 1");
  const std::size_t n = probabilities.rows();
  const std::size_t o = probabilities.cols();
  MetricReport r;
  r.k = k;

  double weighted = 0, support_total = 0;
  double tp_all = 0, fp_all = 0, fn_all = 0;
  double auc_sum = 0;
  std::size_t auc_count = 0;
  for (std::size_t j = 0; j < o; ++j) {
    double tp = 0, fp = 0, fn = 0;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      const bool pred = probabilities.at(i, j) >= threshold;
      const bool truth = labels.at(i, j) > 0.5;
      tp += pred && truth;
      fp += pred && !truth;
      fn += !pred && truth;
      s[i] = probabilities.at(i, j);
      y[i] = truth;
    }
    const double support = tp + fn;
    const double f1 = tp > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    weighted += support * f1;
    support_total += support;
    tp_all += tp;
    fp_all += fp;
    fn_all += fn;
    if (support > 0 && support < static_cast<double>(n)) {
      auc_sum += auroc(s, y);
      ++auc_count;
    }
  }
  if (support_total == 0) throw InputError("compute_metrics: no positive labels anywhere");
  r.w_f1 = weighted / support_total;
  r.f1 = tp_all > 0 ? 2 * tp_all / (2 * tp_all + fp_all + fn_all) : 0.0;
  if (auc_count == 0) throw InputError("compute_metrics: AUROC undefined, no label has both classes");
  r.auroc = auc_sum / static_cast<double>(auc_count);

  double recall_sum = 0;
  std::size_t recall_records = 0;
  std::vector<std::size_t> idx(o);
  for (std::size_t i = 0; i < n; ++i) {
    double positives = 0;
    for (std::size_t j = 0; j < o; ++j) positives += labels.at(i, j) > 0.5;
    if (positives == 0) continue;
    std::iota(idx.begin(), idx.end(), 0);
    // Highest scores first; ties go to the lower label index.
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return probabilities.at(i, a) > probabilities.at(i, b);
    });
    double hits = 0;
    for (std::size_t t = 0; t < std::min(k, o); ++t) hits += labels.at(i, idx[t]) > 0.5;
    recall_sum += hits / positives;
    ++recall_records;
  }
  r.recall_at_k = recall_sum / static_cast<double>(recall_records);
  return r;
}

SeedSummary summarize(std::vector<double> values) {
  SeedSummary s;
  s.values = std::move(values);
  const double n = static_cast<double>(s.values.size());
  if (s.values.empty()) return s;
  s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
  if (s.values.size() > 1) {
    double ss = 0;
    for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
    s.std_error = std::sqrt(ss / (n - 1)) / std::sqrt(n);
  }
  return s;
}

}  // namespace orthocare
