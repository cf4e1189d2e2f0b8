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

#include "orthocare/dataset_io.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "orthocare/error.hpp"

namespace orthocare::data {

using nlohmann::json;

void write_jsonl(const Dataset& ds, std::ostream& out) {
  for (const auto& r : ds.records) {
    json j;
    j["visits"] = r.visits;
    std::vector<int> label(r.label.begin(), r.label.end());
    j["label"] = label;
    j["domain"] = static_cast<int>(r.domain);
    out << j.dump() << '\n';
  }
}

void save_jsonl(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_jsonl(ds, out);
  if (!out) throw IoError("write failed: " + path);
}

namespace {

[[noreturn]] void bad_line(std::size_t line_no, const std::string& what) {
  throw InputError("line " + std::to_string(line_no) + ": " + what);
}

PatientRecord parse_record(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    bad_line(line_no, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) bad_line(line_no, "expected a JSON object");
  for (const char* key : {"visits", "label", "domain"}) {
    if (!j.contains(key)) bad_line(line_no, std::string("missing field '") + key + "'");
  }
  PatientRecord r;
  const auto& visits = j["visits"];
  if (!visits.is_array() || visits.empty()) bad_line(line_no, "visits must be a nonempty array");
  for (const auto& v : visits) {
    if (!v.is_array() || v.empty()) bad_line(line_no, "every visit must be a nonempty array");
    std::vector<std::uint32_t> codes;
    for (const auto& c : v) {
      if (!c.is_number_integer() || c.get<long long>() < 0) {
        bad_line(line_no, "code indices must be nonnegative integers");
      }
      const auto value = c.get<long long>();
      if (value > 0xffffffffLL) bad_line(line_no, "code index too large");
      codes.push_back(static_cast<std::uint32_t>(value));
    }
    std::sort(codes.begin(), codes.end());
    codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
    r.visits.push_back(std::move(codes));
  }
  const auto& label = j["label"];
  if (!label.is_array()) bad_line(line_no, "label must be an array");
  for (const auto& y : label) {
    if (!y.is_number_integer() || (y.get<int>() != 0 && y.get<int>() != 1)) {
      bad_line(line_no, "label entries must be 0 or 1");
    }
    r.label.push_back(static_cast<std::uint8_t>(y.get<int>()));
  }
  const auto& domain = j["domain"];
  if (!domain.is_number_integer() || (domain.get<int>() != 0 && domain.get<int>() != 1)) {
    bad_line(line_no, "domain must be 0 or 1");
  }
  r.domain = domain.get<int>() == 0 ? Domain::kSource : Domain::kTarget;
  return r;
}

}  // namespace

Dataset read_jsonl(std::istream& in, std::size_t n_codes, std::size_t n_labels) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  std::size_t max_code = 0;
  bool labels_fixed = n_labels > 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    PatientRecord r = parse_record(line, line_no);
    for (const auto& v : r.visits) {
      for (auto c : v) {
        if (n_codes > 0 && c >= n_codes) {
          bad_line(line_no, "code index " + std::to_string(c) + " out of vocabulary [0, " +
                                std::to_string(n_codes) + ")");
        }
        max_code = std::max<std::size_t>(max_code, c);
      }
    }
    if (!labels_fixed) {
      n_labels = r.label.size();
      labels_fixed = true;
    }
    if (r.label.size() != n_labels) {
      bad_line(line_no, "expected " + std::to_string(n_labels) + " labels, got " +
                            std::to_string(r.label.size()));
    }
    ds.records.push_back(std::move(r));
  }
  ds.n_codes = n_codes > 0 ? n_codes : (ds.records.empty() ? 0 : max_code + 1);
  ds.n_labels = n_labels;
  return ds;
}

Dataset load_jsonl(const std::string& path, std::size_t n_codes, std::size_t n_labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_jsonl(in, n_codes, n_labels);
}

}  // namespace orthocare::data
