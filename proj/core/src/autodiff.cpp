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

#include "orthocare/autodiff.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "orthocare/error.hpp"

namespace orthocare::ad {
namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatView = Eigen::Map<RowMat>;
using ConstMatView = Eigen::Map<const RowMat>;

ConstMatView view(const Tensor& t) {
  return ConstMatView(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                      static_cast<Eigen::Index>(t.cols()));
}
MatView view(Tensor& t) {
  return MatView(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                 static_cast<Eigen::Index>(t.cols()));
}

// Views a matmul operand; a vector on the right is a column.
ConstMatView operand_view(const Tensor& t, bool right) {
  if (right && t.rank() == 1) {
    return ConstMatView(t.data().data(), static_cast<Eigen::Index>(t.size()), 1);
  }
  return view(t);
}
MatView operand_view(Tensor& t, bool right) {
  if (right && t.rank() == 1) {
    return MatView(t.data().data(), static_cast<Eigen::Index>(t.size()), 1);
  }
  return view(t);
}

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) +
                   " and " + shape_string(b));
}

void require_same(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) shape_fail(op, a.shape(), b.shape());
}

void require_rank(const char* op, const Var& a, std::size_t rank) {
  if (a.shape().size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + shape_string(a.shape()));
  }
}

Graph& graph_of(const Var& a) {
  if (!a.valid()) throw ShapeError("autodiff: use of an unbound Var");
  return *a.graph();
}

template <typename F, typename G>
Var unary_elementwise(const Var& a, F forward, G derivative) {
  Tensor out = Tensor::zeros_like(a.value());
  const auto in = a.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = forward(in[i]);
  return graph_of(a).make(std::move(out), {a}, [derivative](BackwardContext& c) {
    if (!c.in_grads[0]) return;
    const auto x = c.in_values[0]->data();
    const auto y = c.out_value.data();
    const auto g = c.out_grad.data();
    auto dx = c.in_grads[0]->data();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * derivative(x[i], y[i]);
  });
}

}  // namespace

// ---- Var / Graph -----------------------------------------------------------

const Tensor& Var::value() const {
  if (!graph_) throw ShapeError("autodiff: use of an unbound Var");
  return graph_->node(id_).value;
}
const Tensor& Var::grad() const {
  if (!graph_) throw ShapeError("autodiff: use of an unbound Var");
  return graph_->node(id_).grad;
}

void Graph::check_owned(const Var& v, const char* op) const {
  if (v.graph() != this) {
    throw ShapeError(std::string(op) + ": operand belongs to another graph");
  }
}

Var Graph::constant(Tensor value) {
  Node n;
  n.grad = Tensor::zeros_like(value);
  n.value = std::move(value);
  n.leaf = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::variable(Tensor value) {
  Var v = constant(std::move(value));
  nodes_.back().requires_grad = true;
  return v;
}

Var Graph::parameter(Parameter& param) {
  Var v = variable(param.value);
  nodes_.back().param = &param;
  return v;
}

Tensor Graph::stopped_value(const Tensor& value) {
  if (stopped_source_ != nullptr) {
    if (stopped_next_ >= stopped_source_->size() ||
        (*stopped_source_)[stopped_next_].shape() != value.shape()) {
      throw ShapeError("stop_gradient: replayed graph differs from the recorded one");
    }
    return (*stopped_source_)[stopped_next_++];
  }
  if (stopped_sink_ != nullptr) stopped_sink_->push_back(value);
  return value;
}

Var Graph::make(Tensor value, std::vector<Var> parents, BackwardRule rule) {
  Node n;
  n.parents.reserve(parents.size());
  for (const auto& p : parents) {
    check_owned(p, "autodiff");
    n.parents.push_back(p.id());
    n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  }
  n.grad = Tensor::zeros_like(value);
  n.value = std::move(value);
  if (n.requires_grad) n.rule = std::move(rule);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Graph::backward(const Var& loss) {
  check_owned(loss, "backward");
  const std::size_t root = loss.id();
  if (nodes_[root].value.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     shape_string(nodes_[root].value.shape()));
  }
  std::vector<char> needed(root + 1, 0);
  needed[root] = nodes_[root].requires_grad ? 1 : 0;
  for (std::size_t id = root + 1; id-- > 0;) {
    if (!needed[id]) continue;
    for (auto p : nodes_[id].parents) {
      if (nodes_[p].requires_grad) needed[p] = 1;
    }
  }
  // Intermediate gradients restart from zero; plain variable leaves keep
  // accumulating, parameter leaves flush into their Parameter below.
  for (std::size_t id = 0; id <= root; ++id) {
    Node& n = nodes_[id];
    if (needed[id] && (!n.leaf || n.param != nullptr)) n.grad.fill(0.0);
  }
  if (!needed[root]) return;
  nodes_[root].grad[0] += 1.0;

  for (std::size_t id = root + 1; id-- > 0;) {
    if (!needed[id]) continue;
    Node& n = nodes_[id];
    if (!n.rule) continue;
    BackwardContext ctx{n.value, n.grad, {}, {}};
    ctx.in_values.reserve(n.parents.size());
    ctx.in_grads.reserve(n.parents.size());
    for (auto p : n.parents) {
      ctx.in_values.push_back(&nodes_[p].value);
      ctx.in_grads.push_back(needed[p] ? &nodes_[p].grad : nullptr);
    }
    n.rule(ctx);
  }
  for (std::size_t id = 0; id <= root; ++id) {
    Node& n = nodes_[id];
    if (!needed[id] || n.param == nullptr) continue;
    auto dst = n.param->grad.data();
    const auto src = n.grad.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
}

// ---- Linear algebra ----------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.empty() || sb.empty() || sa.size() > 2 || sb.size() > 2) {
    shape_fail("matmul", sa, sb);
  }
  const std::size_t k_left = sa.back();
  const std::size_t k_right = sb.front();
  if (k_left != k_right) shape_fail("matmul", sa, sb);

  Shape out_shape;
  if (sa.size() == 2) out_shape.push_back(sa[0]);
  if (sb.size() == 2) out_shape.push_back(sb[1]);
  Tensor out(out_shape);
  {
    const auto av = operand_view(a.value(), false);
    const auto bv = operand_view(b.value(), true);
    MatView ov(out.data().data(), av.rows(), bv.cols());
    ov.noalias() = av * bv;
  }
  return graph_of(a).make(std::move(out), {a, b}, [](BackwardContext& c) {
    const auto av = operand_view(*c.in_values[0], false);
    const auto bv = operand_view(*c.in_values[1], true);
    ConstMatView g(c.out_grad.data().data(), av.rows(), bv.cols());
    if (c.in_grads[0]) {
      auto da = operand_view(*c.in_grads[0], false);
      da.noalias() += g * bv.transpose();
    }
    if (c.in_grads[1]) {
      auto db = operand_view(*c.in_grads[1], true);
      db.noalias() += av.transpose() * g;
    }
  });
}

Var transpose(const Var& a) {
  require_rank("transpose", a, 2);
  const auto& s = a.shape();
  Tensor out({s[1], s[0]});
  view(out) = view(a.value()).transpose();
  return graph_of(a).make(std::move(out), {a}, [](BackwardContext& c) {
    if (c.in_grads[0]) view(*c.in_grads[0]) += view(c.out_grad).transpose();
  });
}

// ---- Elementwise binary -------------------------------------------------------

Var add(const Var& a, const Var& b) {
  require_same("add", a, b);
  Tensor out = a.value();
  const auto bv = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return graph_of(a).make(std::move(out), {a, b}, [](BackwardContext& c) {
    const auto g = c.out_grad.data();
    for (int k = 0; k < 2; ++k) {
      if (!c.in_grads[k]) continue;
      auto d = c.in_grads[k]->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same("sub", a, b);
  Tensor out = a.value();
  const auto bv = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return graph_of(a).make(std::move(out), {a, b}, [](BackwardContext& c) {
    const auto g = c.out_grad.data();
    if (c.in_grads[0]) {
      auto d = c.in_grads[0]->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
    }
    if (c.in_grads[1]) {
      auto d = c.in_grads[1]->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same("mul", a, b);
  Tensor out = a.value();
  const auto bv = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return graph_of(a).make(std::move(out), {a, b}, [](BackwardContext& c) {
    const auto g = c.out_grad.data();
    const auto x = c.in_values[0]->data();
    const auto y = c.in_values[1]->data();
    if (c.in_grads[0]) {
      auto d = c.in_grads[0]->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * y[i];
    }
    if (c.in_grads[1]) {
      auto d = c.in_grads[1]->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * x[i];
    }
  });
}

Var div(const Var& a, const Var& b) {
  require_same("div", a, b);
  Tensor out = a.value();
  const auto bv = b.value().data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (bv[i] == 0.0) throw DomainError("div: division by zero");
    o[i] /= bv[i];
  }
  return graph_of(a).make(std::move(out), {a, b}, [](BackwardContext& c) {
    const auto g = c.out_grad.data();
    const auto y = c.in_values[1]->data();
    const auto q = c.out_value.data();
    if (c.in_grads[0]) {
      auto d = c.in_grads[0]->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] / y[i];
    }
    if (c.in_grads[1]) {
      auto d = c.in_grads[1]->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= g[i] * q[i] / y[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  return unary_elementwise(
      a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var add_scalar(const Var& a, double offset) {
  return unary_elementwise(
      a, [offset](double x) { return x + offset; },
      [](double, double) { return 1.0; });
}

Var add_row_bias(const Var& x, const Var& bias) {
  require_rank("add_row_bias", x, 2);
  require_rank("add_row_bias", bias, 1);
  if (x.shape()[1] != bias.shape()[0]) {
    shape_fail("add_row_bias", x.shape(), bias.shape());
  }
  Tensor out = x.value();
  view(out).rowwise() += view(bias.value()).row(0);
  return graph_of(x).make(std::move(out), {x, bias}, [](BackwardContext& c) {
    if (c.in_grads[0]) view(*c.in_grads[0]) += view(c.out_grad);
    if (c.in_grads[1]) {
      view(*c.in_grads[1]).row(0) += view(c.out_grad).colwise().sum();
    }
  });
}

Var scale_rows(const Var& x, const Var& factors) {
  require_rank("scale_rows", x, 2);
  require_rank("scale_rows", factors, 1);
  if (x.shape()[0] != factors.shape()[0]) {
    shape_fail("scale_rows", x.shape(), factors.shape());
  }
  Tensor out = x.value();
  const auto f = factors.value().data();
  auto ov = view(out);
  for (Eigen::Index r = 0; r < ov.rows(); ++r) ov.row(r) *= f[r];
  return graph_of(x).make(std::move(out), {x, factors}, [](BackwardContext& c) {
    const auto g = view(c.out_grad);
    const auto xv = view(*c.in_values[0]);
    const auto f = c.in_values[1]->data();
    if (c.in_grads[0]) {
      auto dx = view(*c.in_grads[0]);
      for (Eigen::Index r = 0; r < g.rows(); ++r) dx.row(r) += f[r] * g.row(r);
    }
    if (c.in_grads[1]) {
      auto df = c.in_grads[1]->data();
      for (Eigen::Index r = 0; r < g.rows(); ++r) df[r] += g.row(r).dot(xv.row(r));
    }
  });
}

// ---- Elementwise unary --------------------------------------------------------

Var relu(const Var& a) {
  // Subgradient at exactly zero is zero.
  return unary_elementwise(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& a) {
  return unary_elementwise(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var log(const Var& a) {
  for (double x : a.value().data()) {
    if (!(x > 0.0)) {
      throw DomainError("log: nonpositive input " + std::to_string(x));
    }
  }
  return unary_elementwise(
      a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Var exp(const Var& a) {
  return unary_elementwise(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var clamp(const Var& a, double lo, double hi) {
  return unary_elementwise(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

// ---- Reductions ---------------------------------------------------------------

Var sum(const Var& a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  return graph_of(a).make(Tensor::scalar(s), {a}, [](BackwardContext& c) {
    if (!c.in_grads[0]) return;
    const double g = c.out_grad[0];
    for (double& d : c.in_grads[0]->data()) d += g;
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean: empty tensor " + shape_string(a.shape()));
  return scale(sum(a), 1.0 / n);
}

Var l1_norm(const Var& a) {
  double s = 0.0;
  for (double x : a.value().data()) s += std::abs(x);
  return graph_of(a).make(Tensor::scalar(s), {a}, [](BackwardContext& c) {
    if (!c.in_grads[0]) return;
    const double g = c.out_grad[0];
    const auto x = c.in_values[0]->data();
    auto d = c.in_grads[0]->data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      d[i] += g * (x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0));
    }
  });
}

Var sq_l2_norm(const Var& a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x * x;
  return graph_of(a).make(Tensor::scalar(s), {a}, [](BackwardContext& c) {
    if (!c.in_grads[0]) return;
    const double g = c.out_grad[0];
    const auto x = c.in_values[0]->data();
    auto d = c.in_grads[0]->data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += 2.0 * g * x[i];
  });
}

Var row_sum(const Var& x) {
  require_rank("row_sum", x, 2);
  Tensor out({x.shape()[0]});
  view(out).row(0) = view(x.value()).rowwise().sum().transpose();
  return graph_of(x).make(std::move(out), {x}, [](BackwardContext& c) {
    if (!c.in_grads[0]) return;
    auto dx = view(*c.in_grads[0]);
    const auto g = c.out_grad.data();
    for (Eigen::Index r = 0; r < dx.rows(); ++r) dx.row(r).array() += g[r];
  });
}

Var col_mean(const Var& x) {
  require_rank("col_mean", x, 2);
  const auto rows = static_cast<double>(x.shape()[0]);
  if (rows == 0) throw ShapeError("col_mean: no rows in " + shape_string(x.shape()));
  Tensor out({x.shape()[1]});
  view(out).row(0) = view(x.value()).colwise().sum() / rows;
  return graph_of(x).make(std::move(out), {x}, [rows](BackwardContext& c) {
    if (!c.in_grads[0]) return;
    view(*c.in_grads[0]).rowwise() += view(c.out_grad).row(0) / rows;
  });
}

Var quadratic_form(const Var& a, const Var& m) {
  require_rank("quadratic_form", a, 1);
  require_rank("quadratic_form", m, 2);
  const std::size_t n = a.shape()[0];
  if (m.shape()[0] != n || m.shape()[1] != n) {
    shape_fail("quadratic_form", a.shape(), m.shape());
  }
  return reshape(row_quadratic_forms(reshape(a, {1, n}), m), {});
}

Var row_quadratic_forms(const Var& a, const Var& m) {
  require_rank("row_quadratic_forms", a, 2);
  require_rank("row_quadratic_forms", m, 2);
  const std::size_t n = a.shape()[1];
  if (m.shape()[0] != n || m.shape()[1] != n) {
    shape_fail("row_quadratic_forms", a.shape(), m.shape());
  }
  Tensor out({a.shape()[0]});
  {
    const auto av = view(a.value());
    const RowMat am = av * view(m.value());
    view(out).row(0) = am.cwiseProduct(av).rowwise().sum().transpose();
  }
  return graph_of(a).make(std::move(out), {a, m}, [](BackwardContext& c) {
    const auto av = view(*c.in_values[0]);
    const auto mv = view(*c.in_values[1]);
    const auto g = c.out_grad.data();
    RowMat ga = av;
    for (Eigen::Index r = 0; r < ga.rows(); ++r) ga.row(r) *= g[r];
    if (c.in_grads[0]) {
      // d(a^T M a)/da = (M + M^T) a
      view(*c.in_grads[0]).noalias() += ga * (mv + mv.transpose());
    }
    if (c.in_grads[1]) {
      // d/dM sum_r g_r a_r^T M a_r = sum_r g_r a_r a_r^T
      view(*c.in_grads[1]).noalias() += ga.transpose() * av;
    }
  });
}

Var inner(const Var& a, const Var& b) {
  require_same("inner", a, b);
  return sum(mul(a, b));
}

// ---- Structural ---------------------------------------------------------------

Var concat(const Var& a, const Var& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() != sb.size() || sa.empty() || sa.size() > 2 ||
      (sa.size() == 2 && sa[1] != sb[1])) {
    shape_fail("concat", sa, sb);
  }
  Shape out_shape = sa;
  out_shape[0] += sb[0];
  std::vector<double> data = a.value().storage();
  const auto& tail = b.value().storage();
  data.insert(data.end(), tail.begin(), tail.end());
  const std::size_t split = a.value().size();
  return graph_of(a).make(Tensor(out_shape, std::move(data)), {a, b},
                          [split](BackwardContext& c) {
                            const auto g = c.out_grad.data();
                            if (c.in_grads[0]) {
                              auto d = c.in_grads[0]->data();
                              for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
                            }
                            if (c.in_grads[1]) {
                              auto d = c.in_grads[1]->data();
                              for (std::size_t i = 0; i < d.size(); ++i) {
                                d[i] += g[split + i];
                              }
                            }
                          });
}

Var slice_rows(const Var& x, std::size_t begin, std::size_t count) {
  require_rank("slice_rows", x, 2);
  const auto& s = x.shape();
  if (begin + count > s[0]) {
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of shape " +
                     shape_string(s));
  }
  const std::size_t cols = s[1];
  const auto& src = x.value().storage();
  std::vector<double> data(src.begin() + static_cast<std::ptrdiff_t>(begin * cols),
                           src.begin() + static_cast<std::ptrdiff_t>((begin + count) * cols));
  const std::size_t offset = begin * cols;
  return graph_of(x).make(Tensor({count, cols}, std::move(data)), {x},
                          [offset](BackwardContext& c) {
                            if (!c.in_grads[0]) return;
                            const auto g = c.out_grad.data();
                            auto d = c.in_grads[0]->data();
                            for (std::size_t i = 0; i < g.size(); ++i) d[offset + i] += g[i];
                          });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return graph_of(a).make(std::move(out), {a}, [](BackwardContext& c) {
    if (!c.in_grads[0]) return;
    const auto g = c.out_grad.data();
    auto d = c.in_grads[0]->data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
  });
}

Var stop_gradient(const Var& a) {
  Graph& g = graph_of(a);
  return g.constant(g.stopped_value(a.value()));
}

Var log_softmax_rows(const Var& x) {
  require_rank("log_softmax_rows", x, 2);
  Tensor out = x.value();
  auto ov = view(out);
  for (Eigen::Index r = 0; r < ov.rows(); ++r) {
    const double mx = ov.row(r).maxCoeff();
    const double lse = mx + std::log((ov.row(r).array() - mx).exp().sum());
    ov.row(r).array() -= lse;
  }
  return graph_of(x).make(std::move(out), {x}, [](BackwardContext& c) {
    if (!c.in_grads[0]) return;
    const auto y = view(c.out_value);
    const auto g = view(c.out_grad);
    auto dx = view(*c.in_grads[0]);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double gs = g.row(r).sum();
      dx.row(r).array() += g.row(r).array() - y.row(r).array().exp() * gs;
    }
  });
}

Var pairwise_sq_dists(const Var& x) {
  require_rank("pairwise_sq_dists", x, 2);
  const std::size_t n = x.shape()[0];
  Tensor out({n, n});
  {
    const auto xv = view(x.value());
    auto ov = view(out);
    for (Eigen::Index i = 0; i < xv.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < xv.rows(); ++j) {
        const double d = (xv.row(i) - xv.row(j)).squaredNorm();
        ov(i, j) = d;
        ov(j, i) = d;
      }
    }
  }
  return graph_of(x).make(std::move(out), {x}, [](BackwardContext& c) {
    if (!c.in_grads[0]) return;
    const auto xv = view(*c.in_values[0]);
    const auto g = view(c.out_grad);
    // dD_ij/dx_i = 2 (x_i - x_j); summing both orientations of each pair
    // gives dx = 2 (diag(rowsum(S)) - S) x with S = G + G^T.
    const RowMat s = g + g.transpose();
    const Eigen::VectorXd rs = s.rowwise().sum();
    RowMat dx = -2.0 * (s * xv);
    for (Eigen::Index i = 0; i < dx.rows(); ++i) dx.row(i) += 2.0 * rs(i) * xv.row(i);
    view(*c.in_grads[0]) += dx;
  });
}

}  // namespace orthocare::ad
