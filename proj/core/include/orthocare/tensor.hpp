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

#ifndef ORTHOCARE_TENSOR_HPP_
#define ORTHOCARE_TENSOR_HPP_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace orthocare {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

// Dense row-major tensor of doubles. Rank 0 is a scalar, rank 1 a vector,
// rank 2 a matrix; the differentiable ops never use higher ranks.
class Tensor {
 public:
  Tensor() : shape_{}, data_(1, 0.0) {}
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  // Rank-2 extents. A vector is viewed as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  // The single value of a scalar (or of any one-element tensor).
  double item() const;

  void fill(double value);
  Tensor reshaped(Shape shape) const;
  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Parameter value plus its accumulated gradient. Gradients accumulate across
// backward passes until zero_grad() is called.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)) {}

  void zero_grad() { grad.fill(0.0); }
};

}  // namespace orthocare

#endif  // ORTHOCARE_TENSOR_HPP_
