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

#ifndef ORTHOCARE_TESTS_TEST_UTIL_HPP_
#define ORTHOCARE_TESTS_TEST_UTIL_HPP_

#include <random>
#include <vector>

#include "orthocare/tensor.hpp"

namespace orthocare::testing {

inline Tensor random_tensor(std::mt19937_64& rng, Shape shape, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = dist(rng);
  return t;
}

// Naive triple loop; independent of the Eigen-backed kernels.
inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += a.at(i, l) * b.at(l, j);
      out.at(i, j) = s;
    }
  }
  return out;
}

inline Tensor naive_transpose(const Tensor& a) {
  Tensor out({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
  }
  return out;
}

inline double naive_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace orthocare::testing

#endif  // ORTHOCARE_TESTS_TEST_UTIL_HPP_
