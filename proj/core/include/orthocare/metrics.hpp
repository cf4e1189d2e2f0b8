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

// Evaluation metrics for multi-label and binary prediction.

#ifndef ORTHOCARE_METRICS_HPP_
#define ORTHOCARE_METRICS_HPP_

#include <cstddef>
#include <vector>

#include "orthocare/tensor.hpp"

namespace orthocare {

struct MetricReport {
  double w_f1 = 0.0;
  double recall_at_k = 0.0;
  double auroc = 0.0;
  // Binary F1 when there is one label, micro-averaged F1 otherwise.
  double f1 = 0.0;
  std::size_t k = 0;
};

// probabilities and labels are [n, o]; labels are 0/1.
//   w_f1:  per-label F1 at `threshold`, weighted by label support.
//   R@k:   per record, positives among the k highest scores over its
//          positive count; averaged over records with at least one positive.
//   AUROC: Mann-Whitney statistic with average ranks for ties, averaged over
//          labels that have both classes.
// Throws InputError on mismatched shapes or when no label has a positive.
MetricReport compute_metrics(const Tensor& probabilities, const Tensor& labels, std::size_t k,
                             double threshold = 0.5);

// Single-column AUROC; InputError unless both classes are present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

struct SeedSummary {
  std::vector<double> values;
  double mean = 0.0;
  double std_error = 0.0;  // sample standard deviation / sqrt(n)
};

SeedSummary summarize(std::vector<double> values);

}  // namespace orthocare

#endif  // ORTHOCARE_METRICS_HPP_
