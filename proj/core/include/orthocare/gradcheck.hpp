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

#ifndef ORTHOCARE_GRADCHECK_HPP_
#define ORTHOCARE_GRADCHECK_HPP_

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "orthocare/autodiff.hpp"
#include "orthocare/tensor.hpp"

namespace orthocare::ad {

// Builds a scalar objective on a fresh graph from leaf Vars, one per
// parameter tensor, in the order they were passed to the checker.
using Objective = std::function<Var(Graph&, std::span<const Var>)>;

struct GradCheckReport {
  // Per parameter tensor: ||analytic - central|| / max(||analytic||,
  // ||central||, 1e-12), Euclidean norms over the tensor's entries.
  std::vector<double> relative_errors;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
};

// Values produced by stop_gradient are held at their unperturbed values in
// every finite-difference evaluation, so both sides differentiate the same
// function.
//
// Compares reverse-mode gradients of `f` with central differences
// (f(p + h) - f(p - h)) / 2h taken on every entry of every parameter.
GradCheckReport finite_difference_report(const Objective& f,
                                         std::span<const Tensor> params,
                                         double step = 1e-5);

double finite_difference_check(const Objective& f, std::span<const Tensor> params,
                               double step = 1e-5);

// Same check over module Parameters, which are perturbed in place and
// restored. Their grad fields are left zeroed.
using ParameterObjective = std::function<Var(Graph&)>;
GradCheckReport finite_difference_report(const ParameterObjective& f,
                                         std::span<Parameter* const> params,
                                         double step = 1e-5);
double finite_difference_check(const ParameterObjective& f,
                               std::span<Parameter* const> params, double step = 1e-5);

}  // namespace orthocare::ad

#endif  // ORTHOCARE_GRADCHECK_HPP_
