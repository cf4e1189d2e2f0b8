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

// Epsilon-regularized M-orthogonal residuals and the domain classifier.
//
//   alpha = <v, v_hat>_M / (||v_hat||_M^2 + eps),   z = v - alpha v_hat
//
// alpha minimizes ||v - alpha v_hat||_M^2 + eps alpha^2, and the residual
// keeps <z, v_hat>_M = <v, v_hat>_M eps / (||v_hat||_M^2 + eps).

#ifndef ORTHOCARE_ORTHO_HPP_
#define ORTHOCARE_ORTHO_HPP_

#include <cstddef>
#include <vector>

#include "orthocare/autodiff.hpp"
#include "orthocare/nn.hpp"
#include "orthocare/sae.hpp"

namespace orthocare {

struct ProjectionResult {
  double alpha = 0.0;
  Tensor v_hat;
  Tensor z;
  double epsilon = 0.0;
};

// ConfigError unless epsilon > 0; ShapeError on mismatched dimensions.
ProjectionResult project(const Tensor& v, const Tensor& v_hat, const Tensor& m, double epsilon);

struct OrthogonalityDeviation {
  double measured = 0.0;  // <z, v_hat>_M
  double analytic = 0.0;  // <v, v_hat>_M eps / (||v_hat||_M^2 + eps)
};

OrthogonalityDeviation orthogonality_deviation(const Tensor& v, const Tensor& v_hat,
                                               const Tensor& m, double epsilon);

struct StabilityCheck {
  double lhs = 0.0;       // ||P_vhat(v) - P_v(v)||_M
  double rhs = 0.0;       // constant * ||v - v_hat||_M
  double constant = 0.0;
};

// Perturbation bound for swapping the reference direction v for v_hat.
StabilityCheck stability_check(const Tensor& v, const Tensor& v_hat, const Tensor& m,
                               double epsilon);

struct ProjectionVars {
  ad::Var alpha;  // [n]
  ad::Var z;      // [n, d]
};

// Row-wise projection of a batch. With detach_alpha the coefficient is a
// constant for backpropagation.
ProjectionVars project_rows(const MetricView& metric, const ad::Var& v, const ad::Var& v_hat,
                            double epsilon, bool detach_alpha = false);

// Two hidden relu layers and a 2-way output; class 1 is the target domain.
class DomainHead {
 public:
  DomainHead() = default;
  DomainHead(std::size_t in_dim, std::size_t hidden1, std::size_t hidden2, Rng& rng);

  ad::Var logits(ad::Graph& g, const ad::Var& z);
  // [n] probability of the target domain.
  ad::Var target_probability(ad::Graph& g, const ad::Var& z);
  std::vector<Parameter*> parameters();

  Linear layer1;
  Linear layer2;
  Linear out;
};

// Mean of the source cross-entropy (class 0) and target cross-entropy
// (class 1), each averaged over its own batch.
ad::Var domain_loss(ad::Graph& g, DomainHead& head, const ad::Var& z_source,
                    const ad::Var& z_target);

}  // namespace orthocare

#endif  // ORTHOCARE_ORTHO_HPP_
