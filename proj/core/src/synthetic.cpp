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

#include "orthocare/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "orthocare/error.hpp"

namespace orthocare::data {

std::string split_name(Split split) {
  switch (split) {
    case Split::kAll: return "all";
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "unknown";
}

std::size_t Dataset::count(Domain d) const {
  return static_cast<std::size_t>(std::count_if(
      records.begin(), records.end(), [d](const PatientRecord& r) { return r.domain == d; }));
}

void SyntheticConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("synthetic config: " + msg); };
  if (n_invariant_concepts < 1) fail("n_invariant_concepts must be >= 1");
  if (codes_per_concept < 1) fail("codes_per_concept must be >= 1");
  if (n_codes < first_background_code()) {
    fail("n_codes (" + std::to_string(n_codes) + ") is smaller than the concept code blocks (" +
         std::to_string(first_background_code()) + ")");
  }
  if (n_codes - first_background_code() < max_codes_per_visit) {
    fail("background block must hold at least max_codes_per_visit codes");
  }
  if (!(shift_strength >= 0.0 && shift_strength <= 1.0)) fail("shift_strength must be in [0, 1]");
  if (min_visits < 1 || min_visits > max_visits) fail("visit range must satisfy 1 <= min <= max");
  if (min_codes_per_visit < 1 || min_codes_per_visit > max_codes_per_visit) {
    fail("codes-per-visit range must satisfy 1 <= min <= max");
  }
  if (n_labels < 1) fail("n_labels must be >= 1");
  if (!(label_noise >= 0.0 && label_noise < 0.5)) fail("label_noise must be in [0, 0.5)");
  if (!(invariant_prevalence >= 0.0 && invariant_prevalence <= 1.0)) {
    fail("invariant_prevalence must be in [0, 1]");
  }
  if (n_covariate_concepts > 0 && (covariate_prevalence.empty() || covariate_offsets.empty())) {
    fail("covariate_prevalence and covariate_offsets must be nonempty");
  }
  for (double p : covariate_prevalence) {
    if (!(p >= 0.0 && p <= 1.0)) fail("covariate_prevalence entries must be in [0, 1]");
  }
  if (!(background_rate >= 0.0 && background_rate < 1.0)) fail("background_rate must be in [0, 1)");
  if (n_patients < 1) fail("n_patients must be >= 1");
}

double SyntheticConfig::covariate_probability(std::size_t j, Domain domain) const {
  const double p = covariate_prevalence[j % covariate_prevalence.size()];
  if (domain == Domain::kSource) return p;
  const double delta = covariate_offsets[j % covariate_offsets.size()];
  return std::clamp(p + shift_strength * delta, 0.0, 1.0);
}

LabelRule::LabelRule(std::size_t n_invariant_concepts, std::size_t n_labels) {
  const std::size_t k = n_invariant_concepts;
  support_.resize(n_labels);
  for (std::size_t j = 0; j < n_labels; ++j) {
    support_[j].push_back(j % k);
    if (j >= k && k > 1) {
      const std::size_t round = j / k;  // >= 1
      const std::size_t partner = (j % k + 1 + (round - 1) % (k - 1)) % k;
      support_[j].push_back(partner);
    }
  }
}

std::vector<std::uint8_t> LabelRule::operator()(
    const std::vector<std::uint8_t>& invariant_active) const {
  std::vector<std::uint8_t> y(support_.size(), 0);
  for (std::size_t j = 0; j < support_.size(); ++j) {
    double score = 0.0;
    for (auto c : support_[j]) score += invariant_active[c] ? 1.0 : 0.0;
    y[j] = score > static_cast<double>(support_[j].size()) - 0.5 ? 1 : 0;
  }
  return y;
}

LatentDraw sample_latent(const SyntheticConfig& config, Domain domain, Rng& rng) {
  LatentDraw latent;
  latent.invariant.resize(config.n_invariant_concepts);
  latent.covariate.resize(config.n_covariate_concepts);
  for (auto& a : latent.invariant) a = rng.bernoulli(config.invariant_prevalence);
  for (std::size_t j = 0; j < latent.covariate.size(); ++j) {
    latent.covariate[j] = rng.bernoulli(config.covariate_probability(j, domain));
  }
  return latent;
}

std::vector<std::uint8_t> sample_labels(const SyntheticConfig& config,
                                        const LatentDraw& latent, Rng& rng) {
  const LabelRule rule(config.n_invariant_concepts, config.n_labels);
  auto y = rule(latent.invariant);
  for (auto& v : y) {
    if (rng.bernoulli(config.label_noise)) v = 1 - v;
  }
  return y;
}

std::vector<std::vector<std::uint32_t>> emit_visits(const SyntheticConfig& config,
                                                    const LatentDraw& latent,
                                                    Rng& rng) {
  std::vector<std::size_t> active;
  for (std::size_t c = 0; c < latent.invariant.size(); ++c) {
    if (latent.invariant[c]) active.push_back(c);
  }
  for (std::size_t c = 0; c < latent.covariate.size(); ++c) {
    if (latent.covariate[c]) active.push_back(config.n_invariant_concepts + c);
  }
  const std::size_t bg_start = config.first_background_code();
  const std::size_t bg_count = config.n_codes - bg_start;

  const auto n_visits = rng.uniform_int(config.min_visits, config.max_visits);
  std::vector<std::vector<std::uint32_t>> visits(n_visits);
  for (auto& visit : visits) {
    const auto n_codes = rng.uniform_int(config.min_codes_per_visit, config.max_codes_per_visit);
    std::set<std::uint32_t> codes;
    int attempts = 0;
    while (codes.size() < n_codes) {
      const bool background =
          active.empty() || ++attempts > 1000 || rng.bernoulli(config.background_rate);
      std::size_t code;
      if (background) {
        code = bg_start + rng.uniform_int(0, bg_count - 1);
      } else {
        const auto concept_index = active[rng.uniform_int(0, active.size() - 1)];
        code = concept_index * config.codes_per_concept +
               rng.uniform_int(0, config.codes_per_concept - 1);
      }
      codes.insert(static_cast<std::uint32_t>(code));
    }
    visit.assign(codes.begin(), codes.end());
  }
  return visits;
}

PatientRecord generate_patient(const SyntheticConfig& config, Domain domain,
                               std::uint64_t index) {
  const std::uint64_t stream =
      derive_seed(config.seed, domain == Domain::kSource ? "patient/source" : "patient/target",
                  index);
  Rng latent_rng(derive_seed(stream, "latent"));
  Rng label_rng(derive_seed(stream, "label"));
  Rng emit_rng(derive_seed(stream, "emit"));
  const LatentDraw latent = sample_latent(config, domain, latent_rng);
  PatientRecord r;
  r.label = sample_labels(config, latent, label_rng);
  r.visits = emit_visits(config, latent, emit_rng);
  r.domain = domain;
  return r;
}

Dataset generate(const SyntheticConfig& config, Domain domain) {
  config.validate();
  Dataset ds;
  ds.n_codes = config.n_codes;
  ds.n_labels = config.n_labels;
  ds.records.reserve(config.n_patients);
  for (std::size_t i = 0; i < config.n_patients; ++i) {
    ds.records.push_back(generate_patient(config, domain, i));
  }
  return ds;
}

SplitDatasets split_dataset(const Dataset& all) {
  const std::size_t n = all.size();
  const auto n_train = static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(n)));
  const auto n_valid = std::min(
      n - n_train, static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n))));
  SplitDatasets out;
  for (Dataset* ds : {&out.train, &out.valid, &out.test}) {
    ds->n_codes = all.n_codes;
    ds->n_labels = all.n_labels;
  }
  out.train.split = Split::kTrain;
  out.valid.split = Split::kValid;
  out.test.split = Split::kTest;
  const auto begin = all.records.begin();
  out.train.records.assign(begin, begin + static_cast<std::ptrdiff_t>(n_train));
  out.valid.records.assign(begin + static_cast<std::ptrdiff_t>(n_train),
                           begin + static_cast<std::ptrdiff_t>(n_train + n_valid));
  out.test.records.assign(begin + static_cast<std::ptrdiff_t>(n_train + n_valid),
                          all.records.end());
  return out;
}

namespace {

std::vector<double> label_rates(const Dataset& ds) {
  std::vector<double> rates(ds.n_labels, 0.0);
  for (const auto& r : ds.records) {
    for (std::size_t j = 0; j < rates.size() && j < r.label.size(); ++j) rates[j] += r.label[j];
  }
  if (!ds.records.empty()) {
    for (auto& x : rates) x /= static_cast<double>(ds.records.size());
  }
  return rates;
}

}  // namespace

double label_marginal_gap(const Dataset& source, const Dataset& target) {
  const auto ps = label_rates(source);
  const auto pt = label_rates(target);
  double gap = 0.0;
  for (std::size_t j = 0; j < std::min(ps.size(), pt.size()); ++j) {
    gap = std::max(gap, std::abs(ps[j] - pt[j]));
  }
  return gap;
}

std::vector<double> code_frequencies(const Dataset& ds) {
  std::vector<double> freq(ds.n_codes, 0.0);
  double total = 0.0;
  for (const auto& r : ds.records) {
    for (const auto& v : r.visits) {
      for (auto c : v) {
        freq[c] += 1.0;
        total += 1.0;
      }
    }
  }
  if (total > 0) {
    for (auto& f : freq) f /= total;
  }
  return freq;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(p.size(), q.size()); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

}  // namespace orthocare::data
