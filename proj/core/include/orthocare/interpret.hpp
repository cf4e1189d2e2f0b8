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

#ifndef ORTHOCARE_INTERPRET_HPP_
#define ORTHOCARE_INTERPRET_HPP_

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "orthocare/checkpoint.hpp"
#include "orthocare/config.hpp"
#include "orthocare/model.hpp"
#include "orthocare/synthetic.hpp"
#include "orthocare/tensor.hpp"

namespace orthocare {

inline constexpr int kReportVersion = 1;

// Indices of the k largest strictly positive entries, largest first, lower
// index first on ties.
std::vector<std::size_t> top_k_dims(const Tensor& s, std::size_t k);

// Copy of s with s[dim] = 0.
Tensor ablate(const Tensor& s, std::size_t dim);

struct DomainDelta {
  // |d(z) - d(z~)| where z~ is projected against W^T s~.
  double dimension = 0.0;
  // |d(z) - d(z')| per requested code, z' from the record with that code removed.
  std::vector<double> per_code;
};

// Output code j is read as input code j when removing codes from a record.
class Interpreter {
 public:
  explicit Interpreter(const Checkpoint& checkpoint);

  std::size_t n_labels() const { return model_.n_labels(); }
  int stage() const { return stage_; }

  Tensor representation(const data::PatientRecord& record);
  Tensor sparse_code(const Tensor& v);
  // Label probabilities read from the decoded code, p(W^T s).
  Tensor code_probabilities(const Tensor& s);
  // Target-domain probability of the residual of v against v_hat.
  double domain_probability(const Tensor& v, const Tensor& v_hat);

  Tensor delta_prob_label(const data::PatientRecord& record, std::size_t dim);
  DomainDelta delta_prob_domain(const data::PatientRecord& record, std::size_t dim,
                                std::span<const std::size_t> codes);

 private:
  void require_stage(int needed, const char* what) const;

  Model model_;
  std::string variant_;
  bool sae_trained_ = false;
  bool domain_trained_ = false;
  Tensor metric_;
  double epsilon_ = 0.0;
  int stage_ = 0;
};

// Record with every occurrence of `code` removed; emptied visits are dropped.
data::PatientRecord remove_code(const data::PatientRecord& record, std::size_t code);

enum class DomainClass { kUnannotated, kSensitive, kInsensitive };
// First letter: label impact, second: domain sensitivity.
enum class Quadrant { kHH = 0, kHL = 1, kLH = 2, kLL = 3 };

std::string quadrant_name(Quadrant q);

struct CodeAttribution {
  std::size_t code = 0;
  double label_delta = 0.0;
  double domain_impact = 0.0;
  DomainClass domain_class = DomainClass::kUnannotated;
  std::optional<Quadrant> quadrant;
};

struct DimensionReport {
  std::size_t dim = 0;
  double activation = 0.0;
  double domain_delta = 0.0;
  std::vector<double> label_delta;     // every output code
  std::vector<CodeAttribution> codes;  // mapped codes, largest label delta first
  std::array<std::size_t, 4> quadrant_counts{};
};

struct PatientReport {
  std::size_t record_index = 0;
  std::vector<DimensionReport> dimensions;
};

struct InterpretationReport {
  AblationConfig config;
  std::string variant;
  std::vector<PatientReport> patients;
};

// Splits mapped codes by domain impact rank: the top n are sensitive and the
// bottom n insensitive, n = min(domain_rank_n, floor(count / 2)).
void annotate_codes(std::vector<CodeAttribution>& codes, const AblationConfig& cfg);

InterpretationReport quadrant_report(const Checkpoint& checkpoint,
                                     std::span<const data::PatientRecord> records,
                                     const AblationConfig& cfg);

std::string report_json(const InterpretationReport& report);
std::string scatter_svg(const InterpretationReport& report,
                        std::optional<std::size_t> patient = std::nullopt);
std::string bar_chart_svg(const InterpretationReport& report,
                          std::optional<std::size_t> patient = std::nullopt);

// Writes report.json, scatter.svg and bars.svg for the whole report plus
// patient_<i>_scatter.svg and patient_<i>_bars.svg per patient.
std::vector<std::string> emit_plots(const InterpretationReport& report,
                                    const std::string& out_dir);

}  // namespace orthocare

#endif  // ORTHOCARE_INTERPRET_HPP_
