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

#ifndef ORTHOCARE_RNG_HPP_
#define ORTHOCARE_RNG_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>

namespace orthocare {

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t splitmix64(std::uint64_t x);

// Child seed for a named purpose ("init", "data", "shuffle", ...) and an
// optional index, so independent streams never share state.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose,
                          std::uint64_t index = 0);

// mt19937_64 with distribution code written out here: the standard library's
// distributions are implementation-defined, which would break byte-identical
// outputs across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [lo, hi], unbiased.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, i - 1));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::string state() const;
  void set_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace orthocare

#endif  // ORTHOCARE_RNG_HPP_
