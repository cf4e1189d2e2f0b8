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

// Synthetic multi-visit patient records under pure covariate shift.
//
// Every patient draws Bernoulli activations for a set of latent concepts.
// "Invariant" concepts drive the labels through a fixed thresholded linear
// rule that is the same function in both domains; "covariate" concepts only
// change which codes appear, and their prevalence is what differs between
// the source and target domains. Each concept owns a disjoint block of the
// code vocabulary; codes past the last block are background noise codes
// shared by everyone.
//
// All constants here are generator design choices, not measured quantities.

#ifndef ORTHOCARE_SYNTHETIC_HPP_
#define ORTHOCARE_SYNTHETIC_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "orthocare/rng.hpp"

namespace orthocare::data {

enum class Domain : std::uint8_t { kSource = 0, kTarget = 1 };
enum class Split { kAll, kTrain, kValid, kTest };

std::string split_name(Split split);

struct PatientRecord {
  // Visits in time order; each visit is a sorted set of code indices.
  std::vector<std::vector<std::uint32_t>> visits;
  // Multi-hot label vector of length n_labels.
  std::vector<std::uint8_t> label;
  Domain domain = Domain::kSource;

  friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

struct Dataset {
  std::vector<PatientRecord> records;
  Split split = Split::kAll;
  std::size_t n_codes = 0;
  std::size_t n_labels = 0;

  std::size_t size() const { return records.size(); }
  std::size_t count(Domain d) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct SplitDatasets {
  Dataset train;
  Dataset valid;
  Dataset test;
};

struct SyntheticConfig {
  std::size_t n_codes = 200;
  std::size_t n_invariant_concepts = 4;
  std::size_t n_covariate_concepts = 4;
  std::size_t codes_per_concept = 20;
  // Scales the covariate prevalence offsets; 0 makes both domains identical.
  double shift_strength = 0.8;
  std::size_t min_visits = 2;
  std::size_t max_visits = 6;
  std::size_t min_codes_per_visit = 2;
  std::size_t max_codes_per_visit = 6;
  std::size_t n_labels = 8;
  double label_noise = 0.05;
  double invariant_prevalence = 0.5;
  // Source-domain activation probability of each covariate concept. Shorter
  // lists repeat cyclically.
  std::vector<double> covariate_prevalence{0.1, 0.1, 0.6, 0.6};
  // Signed target-minus-source prevalence offset at shift_strength = 1.
  std::vector<double> covariate_offsets{0.7, 0.7, -0.5, -0.5};
  // Probability that a code slot is filled from the background block.
  double background_rate = 0.2;
  // Patients generated per domain before the 70/10/20 split.
  std::size_t n_patients = 5000;
  std::uint64_t seed = 0;

  // Throws ConfigError on any contract violation.
  void validate() const;
  std::size_t first_background_code() const {
    return (n_invariant_concepts + n_covariate_concepts) * codes_per_concept;
  }
  double covariate_probability(std::size_t j, Domain domain) const;
};

struct LatentDraw {
  std::vector<std::uint8_t> invariant;
  std::vector<std::uint8_t> covariate;
};

// The concept-to-label mechanism. Label j fires when every invariant concept
// in its support set is active: j mod K alone for j < K, plus a partner
// concept for later labels. It has no access to the domain.
class LabelRule {
 public:
  LabelRule(std::size_t n_invariant_concepts, std::size_t n_labels);

  std::vector<std::uint8_t> operator()(
      const std::vector<std::uint8_t>& invariant_active) const;
  const std::vector<std::vector<std::size_t>>& support() const { return support_; }

 private:
  std::vector<std::vector<std::size_t>> support_;
};

LatentDraw sample_latent(const SyntheticConfig& config, Domain domain, Rng& rng);
std::vector<std::uint8_t> sample_labels(const SyntheticConfig& config,
                                        const LatentDraw& latent, Rng& rng);
std::vector<std::vector<std::uint32_t>> emit_visits(const SyntheticConfig& config,
                                                    const LatentDraw& latent,
                                                    Rng& rng);

// One patient, a pure function of (config, domain, index).
PatientRecord generate_patient(const SyntheticConfig& config, Domain domain,
                               std::uint64_t index);

// config.n_patients records of one domain, unsplit.
Dataset generate(const SyntheticConfig& config, Domain domain);

// Deterministic 70/10/20 partition in generation order.
SplitDatasets split_dataset(const Dataset& all);

// max_j |P_s(y_j = 1) - P_t(y_j = 1)|.
double label_marginal_gap(const Dataset& source, const Dataset& target);

// Occurrence frequency of each code over all visits, normalized to sum 1.
std::vector<double> code_frequencies(const Dataset& ds);
double total_variation(const std::vector<double>& p, const std::vector<double>& q);

}  // namespace orthocare::data

#endif  // ORTHOCARE_SYNTHETIC_HPP_
