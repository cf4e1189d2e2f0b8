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

#include "orthocare/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "orthocare/error.hpp"

namespace orthocare {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

Tensor::Tensor(Shape shape)
    : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("tensor: data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string(shape_));
  }
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::matrix(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("tensor: ragged matrix literal");
    values.insert(values.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

std::size_t Tensor::rows() const {
  if (shape_.size() == 2) return shape_[0];
  return 1;
}

std::size_t Tensor::cols() const {
  if (shape_.size() == 2) return shape_[1];
  if (shape_.size() == 1) return shape_[0];
  return 1;
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("tensor: item() on shape " + shape_string(shape_));
  }
  return data_[0];
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("reshape: cannot view " + shape_string(shape_) + " as " +
                     shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace orthocare
