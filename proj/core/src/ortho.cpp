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

#include "orthocare/ortho.hpp"

#include <cmath>
#include <string>

#include "orthocare/error.hpp"

namespace orthocare {

namespace {

void check_projection_args(const Tensor& v, const Tensor& v_hat, const Tensor& m,
                           double epsilon) {
  if (!(epsilon > 0.0)) {
    throw ConfigError("project: epsilon must be > 0, got " + std::to_string(epsilon));
  }
  if (v.rank() != 1 || v_hat.shape() != v.shape() || m.rank() != 2 || m.rows() != v.size() ||
      m.cols() != v.size()) {
    throw ShapeError("project: v " + shape_string(v.shape()) + ", v_hat " +
                     shape_string(v_hat.shape()) + ", M " + shape_string(m.shape()));
  }
}

double denominator(const Tensor& v_hat, const Tensor& m, double epsilon) {
  const double den = m_norm_sq(v_hat, m) + epsilon;
  // A PSD metric keeps this at least epsilon, up to rounding in the quadratic form.
  if (!(den >= epsilon * (1.0 - 1e-6))) {
    throw DomainError("project: denominator " + std::to_string(den) +
                      " below epsilon; metric is not positive semidefinite");
  }
  return den;
}

Tensor axpy(double a, const Tensor& x, const Tensor& y) {
  Tensor out = y;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * x[i];
  return out;
}

}  // namespace

ProjectionResult project(const Tensor& v, const Tensor& v_hat, const Tensor& m,
                         double epsilon) {
  check_projection_args(v, v_hat, m, epsilon);
  ProjectionResult r;
  r.epsilon = epsilon;
  r.alpha = m_inner(v, v_hat, m) / denominator(v_hat, m, epsilon);
  r.v_hat = v_hat;
  r.z = axpy(-r.alpha, v_hat, v);
  return r;
}

OrthogonalityDeviation orthogonality_deviation(const Tensor& v, const Tensor& v_hat,
                                               const Tensor& m, double epsilon) {
  const ProjectionResult p = project(v, v_hat, m, epsilon);
  OrthogonalityDeviation d;
  d.measured = m_inner(p.z, v_hat, m);
  d.analytic = m_inner(v, v_hat, m) * epsilon / denominator(v_hat, m, epsilon);
  return d;
}

StabilityCheck stability_check(const Tensor& v, const Tensor& v_hat, const Tensor& m,
                               double epsilon) {
  check_projection_args(v, v_hat, m, epsilon);
  const double nv_sq = std::max(0.0, m_norm_sq(v, m));
  const double nv = std::sqrt(nv_sq);
  const double den_hat = denominator(v_hat, m, epsilon);
  const double den_v = denominator(v, m, epsilon);
  const double n_sum = std::sqrt(std::max(0.0, m_norm_sq(axpy(1.0, v, v_hat), m)));
  const double n_diff = std::sqrt(std::max(0.0, m_norm_sq(axpy(-1.0, v_hat, v), m)));

  const double alpha_hat = m_inner(v, v_hat, m) / den_hat;
  const double alpha_self = nv_sq / den_v;
  Tensor diff = v_hat;
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = alpha_hat * v_hat[i] - alpha_self * v[i];

  StabilityCheck s;
  s.lhs = std::sqrt(std::max(0.0, m_norm_sq(diff, m)));
  s.constant = nv / std::sqrt(epsilon) +
               nv * (nv / den_hat + nv_sq * n_sum / (den_hat * den_v));
  s.rhs = s.constant * n_diff;
  return s;
}

ProjectionVars project_rows(const MetricView& metric, const ad::Var& v, const ad::Var& v_hat,
                            double epsilon, bool detach_alpha) {
  if (!(epsilon > 0.0)) {
    throw ConfigError("project: epsilon must be > 0, got " + std::to_string(epsilon));
  }
  if (v.shape() != v_hat.shape()) {
    throw ShapeError("project: v " + shape_string(v.shape()) + " vs v_hat " +
                     shape_string(v_hat.shape()));
  }
  ad::Var den = ad::add_scalar(metric.row_norm_sq(v_hat), epsilon);
  for (double x : den.value().data()) {
    if (!(x >= epsilon * (1.0 - 1e-6))) {
      throw DomainError("project: denominator below epsilon");
    }
  }
  ProjectionVars out;
  out.alpha = ad::div(metric.row_inner(v, v_hat), den);
  ad::Var a = detach_alpha ? ad::stop_gradient(out.alpha) : out.alpha;
  out.z = ad::sub(v, ad::scale_rows(v_hat, a));
  return out;
}

DomainHead::DomainHead(std::size_t in_dim, std::size_t hidden1, std::size_t hidden2, Rng& rng)
    : layer1("domain_head.layer1", in_dim, hidden1, rng),
      layer2("domain_head.layer2", hidden1, hidden2, rng),
      out("domain_head.out", hidden2, 2, rng) {}

ad::Var DomainHead::logits(ad::Graph& g, const ad::Var& z) {
  return out(g, ad::relu(layer2(g, ad::relu(layer1(g, z)))));
}

ad::Var DomainHead::target_probability(ad::Graph& g, const ad::Var& z) {
  ad::Var l = logits(g, z);
  const std::size_t n = l.shape()[0];
  // softmax over two classes: p1 = sigmoid(l1 - l0).
  Tensor diff({2, 1}, {-1.0, 1.0});
  return ad::reshape(ad::sigmoid(ad::matmul(l, g.constant(std::move(diff)))), {n});
}

std::vector<Parameter*> DomainHead::parameters() {
  return {&layer1.weight, &layer1.bias, &layer2.weight, &layer2.bias, &out.weight, &out.bias};
}

namespace {

ad::Var mean_cross_entropy(ad::Graph& g, DomainHead& head, const ad::Var& z, std::size_t cls) {
  ad::Var logp = ad::log_softmax_rows(head.logits(g, z));
  const std::size_t n = logp.shape()[0];
  Tensor pick({n, 2});
  for (std::size_t i = 0; i < n; ++i) pick.at(i, cls) = -1.0 / static_cast<double>(n);
  return ad::inner(logp, g.constant(std::move(pick)));
}

}  // namespace

ad::Var domain_loss(ad::Graph& g, DomainHead& head, const ad::Var& z_source,
                    const ad::Var& z_target) {
  if (z_source.shape().size() != 2 || z_source.shape()[0] == 0 ||
      z_target.shape().size() != 2 || z_target.shape()[0] == 0) {
    throw InputError("domain_loss: batches must be nonempty matrices");
  }
  return ad::scale(ad::add(mean_cross_entropy(g, head, z_source, 0),
                           mean_cross_entropy(g, head, z_target, 1)),
                   0.5);
}

}  // namespace orthocare
