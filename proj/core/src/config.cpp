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

#include "orthocare/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include "orthocare/error.hpp"
#include "orthocare/rng.hpp"

namespace orthocare {

namespace {

const std::vector<std::pair<Variant, std::string>>& variant_table() {
  static const std::vector<std::pair<Variant, std::string>> table{
      {Variant::kFull, "full"},
      {Variant::kNoRecNoDcl, "no_rec_no_dcl"},
      {Variant::kNoOrthNoDcl, "no_orth_no_dcl"},
      {Variant::kEuclideanMetric, "euclidean_metric"},
      {Variant::kNoDcl, "no_dcl"},
      {Variant::kBase, "base"},
      {Variant::kOracle, "oracle"},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Shortest text that reads back to the same double.
std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
  throw ConfigError("config: " + key + " = '" + value + "' is not " + expected);
}

double parse_double(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(x)) {
    bad_value(key, value, "a finite number");
  }
  return x;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  std::uint64_t x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    bad_value(key, value, "a nonnegative integer");
  }
  return x;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, value, "true or false");
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& key, const std::string& value, Parse parse) {
  std::vector<T> out;
  if (trim(value).empty()) return out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<T>(parse(key, item)));
  return out;
}

template <typename T, typename Format>
std::string format_list(const std::vector<T>& xs, Format fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += fmt(xs[i]);
  }
  return out;
}

struct Field {
  std::string key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

Field size_field(const std::string& key, std::size_t& ref) {
  return {key, [&ref] { return std::to_string(ref); },
          [&ref, key](const std::string& v) { ref = parse_uint(key, v); }};
}
Field u64_field(const std::string& key, std::uint64_t& ref) {
  return {key, [&ref] { return std::to_string(ref); },
          [&ref, key](const std::string& v) { ref = parse_uint(key, v); }};
}
Field double_field(const std::string& key, double& ref) {
  return {key, [&ref] { return format_double(ref); },
          [&ref, key](const std::string& v) { ref = parse_double(key, v); }};
}
Field bool_field(const std::string& key, bool& ref) {
  return {key, [&ref] { return std::string(ref ? "true" : "false"); },
          [&ref, key](const std::string& v) { ref = parse_bool(key, v); }};
}
Field int_field(const std::string& key, int& ref) {
  return {key, [&ref] { return std::to_string(ref); },
          [&ref, key](const std::string& v) {
            const double x = parse_double(key, v);
            if (x != std::floor(x)) bad_value(key, v, "an integer");
            ref = static_cast<int>(x);
          }};
}
Field doubles_field(const std::string& key, std::vector<double>& ref) {
  return {key, [&ref] { return format_list(ref, format_double); },
          [&ref, key](const std::string& v) { ref = parse_list<double>(key, v, parse_double); }};
}
Field sizes_field(const std::string& key, std::vector<std::size_t>& ref) {
  return {key,
          [&ref] { return format_list(ref, [](std::size_t x) { return std::to_string(x); }); },
          [&ref, key](const std::string& v) {
            ref = parse_list<std::size_t>(key, v, parse_uint);
          }};
}

std::vector<Field> fields(ExperimentConfig& c) {
  auto& d = c.data;
  auto& m = c.model;
  auto& t = c.train;
  std::vector<Field> f{
      size_field("data.n_codes", d.n_codes),
      size_field("data.n_invariant_concepts", d.n_invariant_concepts),
      size_field("data.n_covariate_concepts", d.n_covariate_concepts),
      size_field("data.codes_per_concept", d.codes_per_concept),
      double_field("data.shift_strength", d.shift_strength),
      size_field("data.min_visits", d.min_visits),
      size_field("data.max_visits", d.max_visits),
      size_field("data.min_codes_per_visit", d.min_codes_per_visit),
      size_field("data.max_codes_per_visit", d.max_codes_per_visit),
      size_field("data.n_labels", d.n_labels),
      double_field("data.label_noise", d.label_noise),
      double_field("data.invariant_prevalence", d.invariant_prevalence),
      doubles_field("data.covariate_prevalence", d.covariate_prevalence),
      doubles_field("data.covariate_offsets", d.covariate_offsets),
      double_field("data.background_rate", d.background_rate),
      size_field("data.n_patients", d.n_patients),
      u64_field("data.seed", d.seed),
      size_field("model.embed_dim", m.embed_dim),
      size_field("model.hidden_dim", m.hidden_dim),
      size_field("model.repr_dim", m.repr_dim),
      size_field("model.sae_dim", m.sae_dim),
      size_field("model.domain_hidden1", m.domain_hidden1),
      size_field("model.domain_hidden2", m.domain_hidden2),
      {"train.variant", [&t] { return variant_name(t.variant); },
       [&t](const std::string& v) { t.variant = parse_variant(trim(v)); }},
      size_field("train.stage1_end", t.stage1_end),
      size_field("train.stage2_end", t.stage2_end),
      size_field("train.epochs", t.epochs),
      size_field("train.batch_size", t.batch_size),
      double_field("train.learning_rate", t.learning_rate),
      sizes_field("train.lr_decay_epochs", t.lr_decay_epochs),
      double_field("train.lr_decay_factor", t.lr_decay_factor),
      double_field("train.adam_beta1", t.adam_beta1),
      double_field("train.adam_beta2", t.adam_beta2),
      double_field("train.adam_eps", t.adam_eps),
      double_field("train.epsilon", t.epsilon),
      bool_field("train.detach_alpha", t.detach_alpha),
      bool_field("train.freeze_metric_in_recon", t.freeze_metric_in_recon),
      size_field("train.n_target_unlabeled", t.n_target_unlabeled),
      u64_field("train.seed", t.seed),
      double_field("loss.lambda_label", c.loss.lambda_label),
      double_field("loss.lambda1", c.loss.lambda1),
      double_field("loss.lambda2", c.loss.lambda2),
      double_field("loss.lambda3", c.loss.lambda3),
      double_field("loss.gamma", c.loss.gamma),
      double_field("mmd.kernel_mul", c.mmd.kernel_mul),
      int_field("mmd.kernel_num", c.mmd.kernel_num),
      {"mmd.bandwidth",
       [&c] { return c.mmd.bandwidth ? format_double(*c.mmd.bandwidth) : std::string("median"); },
       [&c](const std::string& v) {
         if (trim(v) == "median") {
           c.mmd.bandwidth.reset();
         } else {
           c.mmd.bandwidth = parse_double("mmd.bandwidth", v);
         }
       }},
      size_field("interpret.top_k", c.interpret.top_k),
      double_field("interpret.label_threshold", c.interpret.label_threshold),
      size_field("interpret.domain_rank_n", c.interpret.domain_rank_n),
      size_field("interpret.max_codes_per_dim", c.interpret.max_codes_per_dim),
      size_field("interpret.n_patients", c.interpret.n_patients),
      size_field("probe.steps", c.probe.steps),
      double_field("probe.learning_rate", c.probe.learning_rate),
      double_field("probe.l2", c.probe.l2),
      size_field("probe.n_records", c.probe.n_records),
      size_field("eval.k", c.eval_k),
      double_field("eval.threshold", c.eval_threshold),
  };
  return f;
}

}  // namespace

std::string variant_name(Variant v) {
  for (const auto& [key, name] : variant_table()) {
    if (key == v) return name;
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  for (const auto& [key, n] : variant_table()) {
    if (n == name) return key;
  }
  throw ConfigError("unknown variant '" + name + "'");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> all = [] {
    std::vector<Variant> v;
    for (const auto& entry : variant_table()) v.push_back(entry.first);
    return v;
  }();
  return all;
}

void TrainConfig::validate() const {
  if (!(stage1_end <= stage2_end && stage2_end <= epochs)) {
    throw ConfigError("train: stage boundaries must satisfy stage1_end <= stage2_end <= epochs");
  }
  if (epochs == 0) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 2) throw ConfigError("train: batch_size must be >= 2");
  if (!(learning_rate > 0)) throw ConfigError("train: learning_rate must be > 0");
  if (!(lr_decay_factor > 0)) throw ConfigError("train: lr_decay_factor must be > 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1)) {
    throw ConfigError("train: Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0)) throw ConfigError("train: adam_eps must be > 0");
  if (!(epsilon > 0)) throw ConfigError("train: epsilon must be > 0");
  if (n_target_unlabeled < 2) throw ConfigError("train: n_target_unlabeled must be >= 2");
}

void AblationConfig::validate() const {
  if (top_k < 1) throw ConfigError("interpret: top_k must be >= 1");
  if (!(label_threshold > 0 && label_threshold < 1)) {
    throw ConfigError("interpret: label_threshold must lie in (0, 1)");
  }
  if (domain_rank_n < 1) throw ConfigError("interpret: domain_rank_n must be >= 1");
  if (max_codes_per_dim < 1) throw ConfigError("interpret: max_codes_per_dim must be >= 1");
}

void ExperimentConfig::validate() const {
  data.validate();
  train.validate();
  loss.validate();
  mmd.validate();
  interpret.validate();
  for (std::size_t x : {model.embed_dim, model.hidden_dim, model.repr_dim, model.sae_dim,
                        model.domain_hidden1, model.domain_hidden2}) {
    if (x == 0) throw ConfigError("model: all dimensions must be positive");
  }
  if (probe.steps == 0 || !(probe.learning_rate > 0) || !(probe.l2 >= 0) || probe.n_records < 2) {
    throw ConfigError("probe: steps >= 1, learning_rate > 0, l2 >= 0, n_records >= 2");
  }
  if (eval_k == 0) throw ConfigError("eval: k must be >= 1");
  if (!(eval_threshold > 0 && eval_threshold < 1)) {
    throw ConfigError("eval: threshold must lie in (0, 1)");
  }
}

std::string ExperimentConfig::to_text() const {
  ExperimentConfig copy = *this;
  std::map<std::string, std::string> sorted;
  for (const auto& f : fields(copy)) sorted[f.key] = f.get();
  std::string out;
  for (const auto& [k, v] : sorted) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(to_text()); }

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  for (auto& f : fields(*this)) {
    if (f.key == key) {
      f.set(value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

void ExperimentConfig::apply(const std::map<std::string, std::string>& entries) {
  for (const auto& [k, v] : entries) set(k, v);
}

std::vector<std::string> ExperimentConfig::keys() const {
  ExperimentConfig copy = *this;
  std::vector<std::string> out;
  for (const auto& f : fields(copy)) out.push_back(f.key);
  return out;
}

std::map<std::string, std::string> parse_key_values(std::istream& in,
                                                    const std::string& source) {
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputError(source + ":" + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw InputError(source + ":" + std::to_string(line_no) + ": empty key");
    if (out.count(key)) {
      throw InputError(source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

ExperimentConfig load_config(const std::string& path_or_default) {
  ExperimentConfig c;
  if (!path_or_default.empty() && path_or_default != "default") {
    std::ifstream in(path_or_default);
    if (!in) throw IoError("cannot open config " + path_or_default);
    c.apply(parse_key_values(in, path_or_default));
  }
  c.validate();
  return c;
}

}  // namespace orthocare
