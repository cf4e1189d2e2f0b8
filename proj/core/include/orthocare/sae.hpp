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

// Tied-weight sparse autoencoder and the dictionary-induced metric.
//
//   s = relu(W v),  v_hat = W^T s,  M = W^T W,  <a, b>_M = a^T M b.
//
// Since <a, b>_M = (W a) . (W b), batched inner products never form M.

#ifndef ORTHOCARE_SAE_HPP_
#define ORTHOCARE_SAE_HPP_

#include <cstddef>
#include <memory>
#include <unordered_map>
#include <vector>

#include "orthocare/autodiff.hpp"
#include "orthocare/rng.hpp"
#include "orthocare/tensor.hpp"

namespace orthocare {

// Activations above this count as nonzero in sparsity reports.
inline constexpr double kActiveThreshold = 1e-8;

// Row-wise inner products under either the dictionary metric or the
// identity. A dictionary view remembers the rows it has mapped through W, so
// reusing an operand (including a == b) costs one product.
class MetricView {
 public:
  static MetricView dictionary(const ad::Var& w) { return MetricView(w); }
  static MetricView euclidean() { return MetricView(); }

  bool is_euclidean() const { return !w_.valid(); }
  // [n] inner products of matching rows of a and b.
  ad::Var row_inner(const ad::Var& a, const ad::Var& b) const;
  ad::Var row_norm_sq(const ad::Var& a) const { return row_inner(a, a); }

 private:
  MetricView() = default;
  explicit MetricView(const ad::Var& w) : w_(w), memo_(std::make_shared<Memo>()) {}
  ad::Var map_rows(const ad::Var& a) const;  // A W^T

  struct Memo {
    ad::Var wt;
    std::unordered_map<std::size_t, ad::Var> rows;  // keyed by node id
  };
  ad::Var w_;
  std::shared_ptr<Memo> memo_;
};

class Sae {
 public:
  Sae() = default;
  Sae(std::size_t input_dim, std::size_t code_dim, Rng& rng);

  std::size_t input_dim() const { return weight.value.cols(); }
  std::size_t code_dim() const { return weight.value.rows(); }

  // Batch forms: v [n, d] -> s [n, d_s] -> v_hat [n, d].
  ad::Var encode(ad::Graph& g, const ad::Var& v);
  ad::Var decode(ad::Graph& g, const ad::Var& s);
  ad::Var metric(ad::Graph& g);

  std::vector<Parameter*> parameters() { return {&weight}; }

  Parameter weight;  // [d_s, d]
};

struct ReconLoss {
  ad::Var total;
  ad::Var recon;     // batch mean of ||v - v_hat||_M^2
  ad::Var sparsity;  // batch mean of ||s||_1
  ad::Var codes;     // s
  ad::Var v_hat;
};

struct ReconOptions {
  double gamma = 0.01;
  // Treat M as a constant inside the loss; s and v_hat keep their gradient.
  bool freeze_metric = false;
  // Measure the error with M = I instead of W^T W.
  bool euclidean = false;
};

// Batch mean of ||v - W^T s||_M^2 + gamma ||s||_1 with s = relu(W v).
ReconLoss recon_loss(ad::Graph& g, Sae& sae, const ad::Var& v, const ReconOptions& opts);

// Plain-value forms used by diagnostics and property checks.
Tensor sae_encode(const Tensor& w, const Tensor& v);
Tensor sae_decode(const Tensor& w, const Tensor& s);
Tensor metric(const Tensor& w);
double m_inner(const Tensor& a, const Tensor& b, const Tensor& m);
double m_norm_sq(const Tensor& a, const Tensor& m);

// max |M - M^T| and the smallest eigenvalue of a symmetric matrix.
double asymmetry(const Tensor& m);
double min_eigenvalue(const Tensor& m);

}  // namespace orthocare

#endif  // ORTHOCARE_SAE_HPP_
