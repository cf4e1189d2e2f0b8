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

// Supervised label loss with kernel MMD alignment between the source and
// target representation batches.

#ifndef ORTHOCARE_ALIGNMENT_HPP_
#define ORTHOCARE_ALIGNMENT_HPP_

#include <optional>

#include "orthocare/autodiff.hpp"
#include "orthocare/encoder.hpp"

namespace orthocare {

struct MmdConfig {
  double kernel_mul = 2.0;
  int kernel_num = 5;
  // Unset means the median pairwise squared distance of the pooled batch.
  std::optional<double> bandwidth;

  void validate() const;
};

struct LossWeights {
  double lambda_label = 1.0;
  double lambda1 = 0.01;  // alignment
  double lambda2 = 5e-3;  // reconstruction
  double lambda3 = 0.3;   // domain
  double gamma = 0.01;    // sparsity

  void validate() const;
};

// Median over distinct pairs of the entries of a pairwise squared-distance
// matrix. Falls back to their mean, then to 1, when the median is zero.
double median_bandwidth(const Tensor& sq_dists);

// Biased multi-kernel estimate of MMD^2 between the rows of a and b, with
// Gaussian kernels exp(-d / (base * mul^(i - num/2))), i = 0..num-1. The
// bandwidth is not differentiated. Symmetric in (a, b) bit for bit.
ad::Var mmd(const ad::Var& a, const ad::Var& b, const MmdConfig& cfg);
double mmd(const Tensor& a, const Tensor& b, const MmdConfig& cfg);

// Mean binary cross-entropy with probabilities clamped to [1e-9, 1 - 1e-9].
ad::Var bce(const ad::Var& probabilities, const Tensor& labels);

struct LabelLoss {
  ad::Var total;
  ad::Var bce;
  ad::Var mmd;  // raw MMD^2 before weighting and rescaling
};

// BCE(source) + lambda1 * mmd(vs, vt) / (||sg(mean_rows(vs))||^2 + 1e-12).
LabelLoss label_loss(const ad::Var& source_repr, const ad::Var& source_probs,
                     const Tensor& source_labels, const ad::Var& target_repr, double lambda1,
                     const MmdConfig& cfg);

// Stacked labels [n, o] of a batch.
Tensor label_matrix(RecordBatch records, std::size_t n_labels);

}  // namespace orthocare

#endif  // ORTHOCARE_ALIGNMENT_HPP_
