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

// Self-contained property suites over the projection, metric, MMD and
// gradient code. Used by `orthocare verify-math` and the acceptance run.

#ifndef ORTHOCARE_VERIFY_HPP_
#define ORTHOCARE_VERIFY_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "orthocare/tensor.hpp"

namespace orthocare {

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::size_t cases = 0;
  double worst = 0.0;      // largest error seen (suite specific)
  double tolerance = 0.0;
  std::string detail;
  double seconds = 0.0;
};

// alpha from the closed form vs. the argmin over the grid [-10, 10] step
// 1e-4 of ||v - a v_hat||_M^2 + eps a^2; d = 8, eps in {1e-6, 1e-3}.
// Instances whose optimum falls outside [-9.5, 9.5] are redrawn.
SuiteResult verify_closed_form_projection(std::uint64_t seed, std::size_t instances = 100);

// <z, v_hat>_M against <v, v_hat>_M eps / (||v_hat||_M^2 + eps), relative to
// |<v, v_hat>_M|; plus monotone decay over eps = 1e-2 .. 1e-8.
SuiteResult verify_orthogonality_deviation(std::uint64_t seed, std::size_t instances = 1000);

// Stability bound lhs <= rhs; counts violations.
SuiteResult verify_stability_bound(std::uint64_t seed, std::size_t instances = 1000);

struct MetricCheck {
  double asymmetry = 0.0;       // max |M - M^T|
  double min_eigenvalue = 0.0;
};
MetricCheck check_metric(const Tensor& w);
bool metric_valid(const MetricCheck& c);

// Symmetry and PSD of W^T W for dictionaries drawn like a fresh SAE, and
// a^T M a = ||W a||^2 on random pairs.
SuiteResult verify_metric_validity(std::uint64_t seed, std::size_t pairs = 100);

// mmd(A, A), exact symmetry, and a 3-point single-kernel hand expansion.
SuiteResult verify_mmd(std::uint64_t seed);

// Finite-difference checks of the label, reconstruction, domain and stage-3
// combined objectives on 4-record batches, d = 8, d_s = 16.
std::vector<SuiteResult> verify_gradients(std::uint64_t seed);

std::vector<SuiteResult> verify_math(std::uint64_t seed);

}  // namespace orthocare

#endif  // ORTHOCARE_VERIFY_HPP_
