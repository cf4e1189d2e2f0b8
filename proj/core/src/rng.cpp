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

#include "orthocare/rng.hpp"

#include <sstream>

#include "orthocare/error.hpp"

namespace orthocare {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose,
                          std::uint64_t index) {
  return splitmix64(splitmix64(seed ^ fnv1a64(purpose)) + splitmix64(index));
}

std::uint64_t Rng::uniform_int(std::uint64_t lo, std::uint64_t hi) {
  if (hi < lo) throw ConfigError("Rng::uniform_int: empty range");
  const std::uint64_t span = hi - lo;
  if (span == ~0ULL) return engine_();
  const std::uint64_t range = span + 1;
  // Rejection keeps every value equally likely.
  const std::uint64_t limit = ~0ULL - (~0ULL % range) - 1;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x > limit);
  return lo + x % range;
}

std::string Rng::state() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

void Rng::set_state(const std::string& state) {
  std::istringstream in(state);
  in >> engine_;
  if (!in) throw InputError("Rng::set_state: malformed engine state");
}

}  // namespace orthocare
