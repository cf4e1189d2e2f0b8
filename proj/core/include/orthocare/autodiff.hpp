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

// Reverse-mode differentiation over dense tensors.
//
// A Graph is a tape: every op appends a node whose parents were created
// before it, so reverse creation order is a valid topological order and
// backward() visits each reachable node exactly once. A Graph is confined to
// a single thread; independent graphs share nothing.
//
// Broadcasting is deliberately narrow: binary elementwise ops require equal
// shapes, scale()/add_scalar() take a constant, and add_row_bias() adds a
// vector to every row of a matrix.

#ifndef ORTHOCARE_AUTODIFF_HPP_
#define ORTHOCARE_AUTODIFF_HPP_

#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

#include "orthocare/tensor.hpp"

namespace orthocare::ad {

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the Graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  // Gradient after backward(). Zero for nodes that did not require one.
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  Graph* graph() const { return graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// What a backward rule sees. in_grads[i] is null when parent i needs no
// gradient; rules must accumulate (+=) into non-null entries.
struct BackwardContext {
  const Tensor& out_value;
  const Tensor& out_grad;
  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
};

using BackwardRule = std::function<void(BackwardContext&)>;

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf that never receives a gradient.
  Var constant(Tensor value);
  // Leaf whose gradient accumulates in the node across backward() calls.
  Var variable(Tensor value);
  // Leaf bound to a Parameter; backward() accumulates into param.grad. The
  // parameter must outlive the graph.
  Var parameter(Parameter& param);

  // Appends an op node. Used by op implementations.
  Var make(Tensor value, std::vector<Var> parents, BackwardRule rule);

  // Propagates d(loss)/d(node) to every reachable node. loss must be a
  // scalar (rank 0 or a single element).
  void backward(const Var& loss);

  std::size_t size() const { return nodes_.size(); }

  // Gradient checking treats stop_gradient outputs as constants of the
  // perturbation: one pass records them in creation order, later passes on
  // an identically built graph replay the recorded values.
  void record_stopped(std::vector<Tensor>* sink) { stopped_sink_ = sink; }
  void replay_stopped(const std::vector<Tensor>* source) { stopped_source_ = source; }
  Tensor stopped_value(const Tensor& value);

 private:
  friend class Var;

  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    BackwardRule rule;
    Parameter* param = nullptr;
    bool requires_grad = false;
    bool leaf = false;
  };

  const Node& node(std::size_t id) const { return nodes_[id]; }
  void check_owned(const Var& v, const char* op) const;

  // A deque keeps references from Var::value() valid as the tape grows.
  std::deque<Node> nodes_;
  std::vector<Tensor>* stopped_sink_ = nullptr;
  const std::vector<Tensor>* stopped_source_ = nullptr;
  std::size_t stopped_next_ = 0;
};

// ---- Ops -------------------------------------------------------------------
// Every op checks operand shapes and throws ShapeError naming the op and both
// shapes on mismatch.

// Matrix product. Rank-1 operands act as a row (left) or column (right).
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);
// X[m,n] + b[n] applied to every row.
Var add_row_bias(const Var& x, const Var& bias);
// X[m,n] with row i multiplied by c[i].
Var scale_rows(const Var& x, const Var& c);

Var relu(const Var& a);
Var sigmoid(const Var& a);
// Throws DomainError if any input is <= 0.
Var log(const Var& a);
Var exp(const Var& a);
// Gradient passes where lo <= x <= hi, zero elsewhere.
Var clamp(const Var& a, double lo, double hi);

Var sum(const Var& a);
Var mean(const Var& a);
Var l1_norm(const Var& a);
Var sq_l2_norm(const Var& a);
// Sum over columns: X[m,n] -> [m].
Var row_sum(const Var& x);
// Per-row sum over all rows: X[m,n] -> [n] averaged over rows.
Var col_mean(const Var& x);

// a^T M a for a vector a.
Var quadratic_form(const Var& a, const Var& m);
// [a_i^T M a_i] for every row of A.
Var row_quadratic_forms(const Var& a, const Var& m);
// Sum of elementwise products of equally shaped operands.
Var inner(const Var& a, const Var& b);

// Stacks rows (matrices with equal column counts) or joins vectors.
Var concat(const Var& a, const Var& b);
Var slice_rows(const Var& x, std::size_t begin, std::size_t count);
Var reshape(const Var& a, Shape shape);

// Value passes through unchanged; the gradient does not.
// Differentiable code that needs a detached value (e.g. a data-dependent
// hyperparameter) should read it from a stop_gradient node.
Var stop_gradient(const Var& a);

// Row-wise numerically stable log-softmax.
Var log_softmax_rows(const Var& x);
// D[i,j] = ||x_i - x_j||^2 for the rows of X.
Var pairwise_sq_dists(const Var& x);

}  // namespace orthocare::ad

#endif  // ORTHOCARE_AUTODIFF_HPP_
