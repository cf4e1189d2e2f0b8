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

#ifndef ORTHOCARE_TOOLS_COMMANDS_HPP_
#define ORTHOCARE_TOOLS_COMMANDS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace orthocare::cli {

struct CommonOptions {
  std::string config = "default";
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> set;  // key=value overrides
  std::vector<std::string> argv;
};

struct GenDataOptions {
  std::optional<double> shift;
};

struct TrainOptions {
  std::optional<std::string> variant;
  std::optional<double> shift;
  std::string data;
  std::vector<std::uint64_t> seeds;
};

struct EvalOptions {
  std::vector<std::string> checkpoints;
  std::string data;
  std::optional<std::size_t> k;
};

struct InterpretOptions {
  std::string checkpoint;
  std::string data;
};

struct ProbeOptions {
  std::string base;
  std::string checkpoint;
  std::string data;
};

// Each returns the process exit code. Library errors propagate.
int gen_data(const CommonOptions& common, const GenDataOptions& opts);
int train(const CommonOptions& common, const TrainOptions& opts);
int eval(const CommonOptions& common, const EvalOptions& opts);
int interpret(const CommonOptions& common, const InterpretOptions& opts);
int probe(const CommonOptions& common, const ProbeOptions& opts);
int gradcheck(const CommonOptions& common);
int verify_math(const CommonOptions& common);

}  // namespace orthocare::cli

#endif  // ORTHOCARE_TOOLS_COMMANDS_HPP_
