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

#include "orthocare/sae.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "orthocare/error.hpp"
#include "orthocare/nn.hpp"

namespace orthocare {

ad::Var MetricView::row_inner(const ad::Var& a, const ad::Var& b) const {
  if (a.shape() != b.shape() || a.shape().size() != 2) {
    throw ShapeError("row_inner: operands " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()) + " must be equal-shape matrices");
  }
  if (is_euclidean()) return ad::row_sum(ad::mul(a, b));
  const ad::Var wa = map_rows(a);
  return ad::row_sum(ad::mul(wa, a.id() == b.id() ? wa : map_rows(b)));
}

ad::Var MetricView::map_rows(const ad::Var& a) const {
  if (a.graph() != w_.graph()) throw ShapeError("row_inner: operand from another graph");
  if (auto it = memo_->rows.find(a.id()); it != memo_->rows.end()) return it->second;
  if (!memo_->wt.valid()) memo_->wt = ad::transpose(w_);
  ad::Var out = ad::matmul(a, memo_->wt);
  memo_->rows.emplace(a.id(), out);
  return out;
}

Sae::Sae(std::size_t input_dim, std::size_t code_dim, Rng& rng)
    : weight("sae.weight", uniform_tensor({code_dim, input_dim},
                                          1.0 / std::sqrt(static_cast<double>(input_dim)), rng)) {
  if (input_dim == 0 || code_dim == 0) throw ConfigError("sae: dimensions must be positive");
}

ad::Var Sae::encode(ad::Graph& g, const ad::Var& v) {
  if (v.shape().size() != 2 || v.shape()[1] != input_dim()) {
    throw ShapeError("sae_encode: input " + shape_string(v.shape()) + " vs dictionary " +
                     shape_string(weight.value.shape()));
  }
  return ad::relu(ad::matmul(v, ad::transpose(g.parameter(weight))));
}

ad::Var Sae::decode(ad::Graph& g, const ad::Var& s) {
  if (s.shape().size() != 2 || s.shape()[1] != code_dim()) {
    throw ShapeError("sae_decode: code " + shape_string(s.shape()) + " vs dictionary " +
                     shape_string(weight.value.shape()));
  }
  return ad::matmul(s, g.parameter(weight));
}

ad::Var Sae::metric(ad::Graph& g) {
  ad::Var w = g.parameter(weight);
  return ad::matmul(ad::transpose(w), w);
}

ReconLoss recon_loss(ad::Graph& g, Sae& sae, const ad::Var& v, const ReconOptions& opts) {
  ReconLoss out;
  out.codes = sae.encode(g, v);
  out.v_hat = sae.decode(g, out.codes);
  ad::Var w = g.parameter(sae.weight);
  const MetricView geometry = opts.euclidean ? MetricView::euclidean()
                              : opts.freeze_metric ? MetricView::dictionary(ad::stop_gradient(w))
                                                   : MetricView::dictionary(w);
  out.recon = ad::mean(geometry.row_norm_sq(ad::sub(v, out.v_hat)));
  const double n = static_cast<double>(v.shape()[0]);
  out.sparsity = ad::scale(ad::l1_norm(out.codes), 1.0 / n);
  out.total = ad::add(out.recon, ad::scale(out.sparsity, opts.gamma));
  return out;
}

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> view(const Tensor& t) {
  return {t.data().data(), static_cast<Eigen::Index>(t.rows()),
          static_cast<Eigen::Index>(t.cols())};
}

Eigen::Map<const Eigen::VectorXd> vec(const Tensor& t) {
  return {t.data().data(), static_cast<Eigen::Index>(t.size())};
}

void expect_vector(const Tensor& t, std::size_t n, const char* op, const Tensor& other) {
  if (t.rank() != 1 || t.size() != n) {
    throw ShapeError(std::string(op) + ": " + shape_string(t.shape()) + " vs " +
                     shape_string(other.shape()));
  }
}

}  // namespace

Tensor sae_encode(const Tensor& w, const Tensor& v) {
  expect_vector(v, w.cols(), "sae_encode", w);
  Tensor s({w.rows()});
  Eigen::Map<Eigen::VectorXd>(s.data().data(), static_cast<Eigen::Index>(s.size())) =
      (view(w) * vec(v)).cwiseMax(0.0);
  return s;
}

Tensor sae_decode(const Tensor& w, const Tensor& s) {
  expect_vector(s, w.rows(), "sae_decode", w);
  Tensor v({w.cols()});
  Eigen::Map<Eigen::VectorXd>(v.data().data(), static_cast<Eigen::Index>(v.size())) =
      view(w).transpose() * vec(s);
  return v;
}

Tensor metric(const Tensor& w) {
  Tensor m({w.cols(), w.cols()});
  Eigen::Map<RowMat>(m.data().data(), static_cast<Eigen::Index>(m.rows()),
                     static_cast<Eigen::Index>(m.cols())) = view(w).transpose() * view(w);
  return m;
}

double m_inner(const Tensor& a, const Tensor& b, const Tensor& m) {
  if (m.rank() != 2 || m.rows() != m.cols()) {
    throw ShapeError("m_inner: metric " + shape_string(m.shape()) + " is not square");
  }
  expect_vector(a, m.rows(), "m_inner", m);
  expect_vector(b, m.rows(), "m_inner", m);
  return vec(a).dot(view(m) * vec(b));
}

double m_norm_sq(const Tensor& a, const Tensor& m) { return m_inner(a, a, m); }

double asymmetry(const Tensor& m) {
  return (view(m) - view(m).transpose()).cwiseAbs().maxCoeff();
}

double min_eigenvalue(const Tensor& m) {
  const RowMat sym = 0.5 * (view(m) + view(m).transpose());
  Eigen::SelfAdjointEigenSolver<RowMat> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("min_eigenvalue: solver failed");
  return solver.eigenvalues().minCoeff();
}

}  // namespace orthocare
