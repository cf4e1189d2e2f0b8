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

#include "orthocare/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "orthocare/error.hpp"

namespace orthocare::ad {
namespace {

// Central differences over every entry of `values`, evaluating through
// `eval` after each in-place perturbation.
template <typename Eval>
GradCheckReport compare(std::span<Tensor* const> values, const std::vector<Tensor>& analytic,
                        double step, Eval eval) {
  GradCheckReport report;
  for (std::size_t k = 0; k < values.size(); ++k) {
    Tensor& work = *values[k];
    double diff_sq = 0.0, analytic_sq = 0.0, central_sq = 0.0;
    for (std::size_t i = 0; i < work.size(); ++i) {
      const double saved = work[i];
      work[i] = saved + step;
      const double up = eval();
      work[i] = saved - step;
      const double down = eval();
      work[i] = saved;
      const double central = (up - down) / (2.0 * step);
      const double a = analytic[k][i];
      diff_sq += (a - central) * (a - central);
      analytic_sq += a * a;
      central_sq += central * central;
    }
    const double denom = std::max({std::sqrt(analytic_sq), std::sqrt(central_sq), 1e-12});
    const double err = std::sqrt(diff_sq) / denom;
    report.relative_errors.push_back(err);
    if (err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_index = k;
    }
  }
  return report;
}

void check_step(double step) {
  if (!(step > 0.0)) throw ConfigError("finite_difference_check: step must be > 0");
}

}  // namespace

GradCheckReport finite_difference_report(const Objective& f,
                                         std::span<const Tensor> params,
                                         double step) {
  check_step(step);
  std::vector<Tensor> analytic;
  std::vector<Tensor> stopped;
  {
    Graph g;
    g.record_stopped(&stopped);
    std::vector<Var> leaves;
    for (const auto& p : params) leaves.push_back(g.variable(p));
    Var loss = f(g, leaves);
    g.backward(loss);
    for (const auto& leaf : leaves) analytic.push_back(leaf.grad());
  }
  std::vector<Tensor> work(params.begin(), params.end());
  std::vector<Tensor*> handles;
  for (auto& w : work) handles.push_back(&w);
  return compare(handles, analytic, step, [&] {
    Graph g;
    g.replay_stopped(&stopped);
    std::vector<Var> leaves;
    for (const auto& p : work) leaves.push_back(g.constant(p));
    return f(g, leaves).value().item();
  });
}

double finite_difference_check(const Objective& f, std::span<const Tensor> params,
                               double step) {
  return finite_difference_report(f, params, step).max_relative_error;
}

GradCheckReport finite_difference_report(const ParameterObjective& f,
                                         std::span<Parameter* const> params,
                                         double step) {
  check_step(step);
  std::vector<Tensor> analytic;
  std::vector<Tensor> stopped;
  for (auto* p : params) p->zero_grad();
  {
    Graph g;
    g.record_stopped(&stopped);
    Var loss = f(g);
    g.backward(loss);
    for (auto* p : params) analytic.push_back(p->grad);
  }
  std::vector<Tensor*> handles;
  for (auto* p : params) handles.push_back(&p->value);
  auto report = compare(handles, analytic, step, [&] {
    Graph g;
    g.replay_stopped(&stopped);
    return f(g).value().item();
  });
  for (auto* p : params) p->zero_grad();
  return report;
}

double finite_difference_check(const ParameterObjective& f,
                               std::span<Parameter* const> params, double step) {
  return finite_difference_report(f, params, step).max_relative_error;
}

}  // namespace orthocare::ad
