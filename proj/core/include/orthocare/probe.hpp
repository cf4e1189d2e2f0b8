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

// Linear probes on frozen representations and the cosine comparison of
// their weight vectors.

#ifndef ORTHOCARE_PROBE_HPP_
#define ORTHOCARE_PROBE_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "orthocare/checkpoint.hpp"
#include "orthocare/config.hpp"
#include "orthocare/synthetic.hpp"
#include "orthocare/tensor.hpp"

namespace orthocare {

struct ProbeFit {
  Tensor weight;  // [o, d]
  Tensor bias;    // [o]
  double final_loss = 0.0;
};

// Independent logistic regressions, one per target column, full batch Adam
// from zero weights. Loss: mean BCE + l2 * ||weight||^2.
// InputError when a target column holds a single class.
ProbeFit linear_probe(const Tensor& features, const Tensor& targets, const ProbeConfig& cfg);

Tensor probe_probabilities(const ProbeFit& fit, const Tensor& features);
// Fraction of (record, column) entries classified correctly at 0.5.
double probe_accuracy(const ProbeFit& fit, const Tensor& features, const Tensor& targets);

// Mean over rows of |cos(a_i, b_i)|; b may have a single row, which is then
// compared with every row of a.
double mean_abs_row_cosine(const Tensor& a, const Tensor& b);

struct ProbeColumn {
  double class_vs_domain_v0 = 0.0;  // cos(W_c(v0), W_d(v0))
  double v0_vs_z = 0.0;             // cos(W_c(v0), W_c(z))
  double v0_vs_v = 0.0;             // cos(W_c(v0), W_c(v))
};

struct ProbeResult {
  ProbeColumn source;
  ProbeColumn target;
  ProbeColumn mean;  // average of the two columns
  // Held-out domain classification accuracy.
  double domain_accuracy_v = 0.0;
  double domain_accuracy_z = 0.0;
  std::vector<std::size_t> labels;  // label columns with both classes in both domains
};

// v0 comes from `base`, v and z from `full`. Class probes are trained per
// domain; the domain probe on the merged records. Domain accuracy trains on
// even-indexed merged records and scores the odd-indexed ones.
ProbeResult probe_cosines(const Checkpoint& base, const Checkpoint& full,
                          const data::Dataset& source, const data::Dataset& target,
                          const ProbeConfig& cfg);

// Residuals z of the rows of v under the checkpoint's projection.
Tensor residual_rows(const Checkpoint& checkpoint, const Tensor& v);

std::string probe_json(const ProbeResult& result);

}  // namespace orthocare

#endif  // ORTHOCARE_PROBE_HPP_
