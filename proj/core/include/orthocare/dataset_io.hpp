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

// Line-delimited JSON datasets: one patient per line,
//   {"visits": [[1,2],[3]], "label": [0,1], "domain": 0}

#ifndef ORTHOCARE_DATASET_IO_HPP_
#define ORTHOCARE_DATASET_IO_HPP_

#include <cstddef>
#include <iosfwd>
#include <string>

#include "orthocare/synthetic.hpp"

namespace orthocare::data {

void save_jsonl(const Dataset& ds, const std::string& path);
void write_jsonl(const Dataset& ds, std::ostream& out);

// n_codes bounds the code indices; every record must carry n_labels labels.
// Zero for either means "infer from the data".
Dataset load_jsonl(const std::string& path, std::size_t n_codes = 0,
                   std::size_t n_labels = 0);
Dataset read_jsonl(std::istream& in, std::size_t n_codes = 0, std::size_t n_labels = 0);

}  // namespace orthocare::data

#endif  // ORTHOCARE_DATASET_IO_HPP_
