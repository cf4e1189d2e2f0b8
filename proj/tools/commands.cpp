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

#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "orthocare/checkpoint.hpp"
#include "orthocare/config.hpp"
#include "orthocare/dataset_io.hpp"
#include "orthocare/error.hpp"
#include "orthocare/interpret.hpp"
#include "orthocare/metrics.hpp"
#include "orthocare/probe.hpp"
#include "orthocare/trainer.hpp"
#include "orthocare/verify.hpp"

namespace orthocare::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr const char* kCheckpointFile = "checkpoint.ockp";

std::string hex(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

void write_manifest(const std::string& dir, const std::string& command,
                    const CommonOptions& common, std::optional<std::uint64_t> config_hash,
                    std::optional<std::uint64_t> seed, const std::vector<std::string>& files) {
  ordered_json m;
  m["command"] = command;
  m["argv"] = common.argv;
  m["artifact_version"] = ORTHOCARE_VERSION;
  m["formats"] = {{"checkpoint", kCheckpointVersion}, {"report", kReportVersion}};
  m["config_hash"] = config_hash ? ordered_json(hex(*config_hash)) : ordered_json(nullptr);
  m["seed"] = seed ? ordered_json(*seed) : ordered_json(nullptr);
  m["files"] = files;
  m["timestamp"] = utc_timestamp();
  write_text(fs::path(dir) / "manifest.json", m.dump(2) + "\n");
}

std::map<std::string, std::string> parse_overrides(const std::vector<std::string>& items) {
  std::map<std::string, std::string> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set expects key=value, got '" + item + "'");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    if (!out.emplace(trim(item.substr(0, eq)), trim(item.substr(eq + 1))).second) {
      throw ConfigError("--set given twice for " + item.substr(0, eq));
    }
  }
  return out;
}

ExperimentConfig resolve_config(const CommonOptions& common) {
  ExperimentConfig cfg = load_config(common.config);
  cfg.apply(parse_overrides(common.set));
  if (common.seed) {
    cfg.data.seed = *common.seed;
    cfg.train.seed = *common.seed;
  }
  cfg.validate();
  return cfg;
}

// Commands that read a checkpoint take only evaluation-side settings from
// --config / --set; everything else comes from the checkpoint.
void apply_evaluation_overrides(ExperimentConfig& cfg, const CommonOptions& common) {
  std::map<std::string, std::string> entries;
  if (!common.config.empty() && common.config != "default") {
    std::ifstream in(common.config);
    if (!in) throw IoError("cannot open config " + common.config);
    entries = parse_key_values(in, common.config);
  }
  for (auto& [k, v] : parse_overrides(common.set)) entries[k] = v;
  for (const auto& [k, v] : entries) {
    if (!(k.starts_with("eval.") || k.starts_with("interpret.") || k.starts_with("probe."))) {
      throw ConfigError("key " + k + " is fixed by the checkpoint");
    }
  }
  cfg.apply(entries);
  cfg.validate();
  if (common.seed && *common.seed != cfg.train.seed) {
    throw ConfigError("--seed " + std::to_string(*common.seed) +
                      " does not match the checkpoint seed " + std::to_string(cfg.train.seed));
  }
}

std::string data_file(data::Domain domain, data::Split split) {
  return std::string(domain == data::Domain::kSource ? "source" : "target") + "_" +
         data::split_name(split) + ".jsonl";
}

constexpr data::Split kSplits[] = {data::Split::kTrain, data::Split::kValid, data::Split::kTest};

data::SplitDatasets& part(ExperimentData& d, data::Domain domain) {
  return domain == data::Domain::kSource ? d.source : d.target;
}

data::Dataset& split_of(data::SplitDatasets& s, data::Split split) {
  switch (split) {
    case data::Split::kTrain: return s.train;
    case data::Split::kValid: return s.valid;
    default: return s.test;
  }
}

ExperimentData load_data(const std::string& dir, const ExperimentConfig& cfg) {
  ExperimentData d;
  for (auto domain : {data::Domain::kSource, data::Domain::kTarget}) {
    for (auto split : kSplits) {
      const std::string path = (fs::path(dir) / data_file(domain, split)).string();
      data::Dataset ds = data::load_jsonl(path, cfg.data.n_codes, cfg.data.n_labels);
      ds.split = split;
      ds.n_codes = cfg.data.n_codes;
      ds.n_labels = cfg.data.n_labels;
      split_of(part(d, domain), split) = std::move(ds);
    }
  }
  d.target_pool = strip_labels(d.target.valid, cfg.train.n_target_unlabeled);
  return d;
}

ExperimentData data_for(const std::string& dir, const ExperimentConfig& cfg) {
  return dir.empty() ? prepare_data(cfg) : load_data(dir, cfg);
}

std::size_t worker_count(std::size_t jobs) {
  const char* env = std::getenv("ORTHOCARE_THREADS");
  std::size_t n = 1;
  if (env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) {
      throw ConfigError(std::string("ORTHOCARE_THREADS must be a positive integer, got '") + env +
                        "'");
    }
    n = static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

ordered_json metrics_json(const MetricReport& r) {
  return {{"w_f1", r.w_f1}, {"recall_at_k", r.recall_at_k}, {"auroc", r.auroc}, {"f1", r.f1}};
}

ordered_json summary_json(const std::vector<MetricReport>& runs) {
  ordered_json out;
  auto add = [&](const char* name, double MetricReport::*field) {
    std::vector<double> values;
    for (const auto& r : runs) values.push_back(r.*field);
    const SeedSummary s = summarize(values);
    out[name] = {{"values", s.values}, {"mean", s.mean}, {"std_error", s.std_error}};
  };
  add("w_f1", &MetricReport::w_f1);
  add("recall_at_k", &MetricReport::recall_at_k);
  add("auroc", &MetricReport::auroc);
  add("f1", &MetricReport::f1);
  return out;
}

int report_suites(const std::vector<SuiteResult>& results, const CommonOptions& common,
                  const std::string& command, std::uint64_t seed) {
  std::size_t failed = 0;
  ordered_json arr = ordered_json::array();
  for (const auto& r : results) {
    std::printf("%s  %-40s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    failed += !r.passed;
    arr.push_back({{"name", r.name},
                   {"passed", r.passed},
                   {"cases", r.cases},
                   {"worst", r.worst},
                   {"tolerance", r.tolerance},
                   {"detail", r.detail}});
  }
  if (!common.out.empty()) {
    ensure_dir(common.out);
    const std::string file = command + ".json";
    write_text(fs::path(common.out) / file, arr.dump(2) + "\n");
    write_manifest(common.out, command, common, std::nullopt, seed, {file});
  }
  if (failed > 0) {
    std::fprintf(stderr, "error: check: %zu of %zu suites failed\n", failed, results.size());
    return 1;
  }
  return 0;
}

}  // namespace

int gen_data(const CommonOptions& common, const GenDataOptions& opts) {
  ExperimentConfig cfg = resolve_config(common);
  if (opts.shift) cfg.data.shift_strength = *opts.shift;
  cfg.validate();
  ensure_dir(common.out);
  ExperimentData d = prepare_data(cfg);
  std::vector<std::string> files;
  for (auto domain : {data::Domain::kSource, data::Domain::kTarget}) {
    for (auto split : kSplits) {
      const std::string name = data_file(domain, split);
      data::save_jsonl(split_of(part(d, domain), split), (fs::path(common.out) / name).string());
      files.push_back(name);
    }
  }
  write_text(fs::path(common.out) / "config.txt", cfg.to_text());
  files.push_back("config.txt");
  write_manifest(common.out, "gen-data", common, cfg.hash(), cfg.data.seed, files);
  std::printf("wrote %zu source and %zu target records to %s\n",
              d.source.train.size() + d.source.valid.size() + d.source.test.size(),
              d.target.train.size() + d.target.valid.size() + d.target.test.size(),
              common.out.c_str());
  return 0;
}

int train(const CommonOptions& common, const TrainOptions& opts) {
  ExperimentConfig base_cfg = resolve_config(common);
  if (opts.variant) base_cfg.train.variant = parse_variant(*opts.variant);
  if (opts.shift) base_cfg.data.shift_strength = *opts.shift;
  base_cfg.validate();
  ensure_dir(common.out);

  struct Job {
    ExperimentConfig cfg;
    std::string dir;
  };
  std::vector<Job> jobs;
  if (opts.seeds.empty()) {
    jobs.push_back({base_cfg, common.out});
  } else {
    for (auto seed : opts.seeds) {
      ExperimentConfig cfg = base_cfg;
      cfg.data.seed = seed;
      cfg.train.seed = seed;
      jobs.push_back({cfg, (fs::path(common.out) / ("seed_" + std::to_string(seed))).string()});
    }
  }
  const bool verbose = jobs.size() == 1;
  std::mutex print_mutex;

  auto run = [&](const Job& job) {
    ensure_dir(job.dir);
    const ExperimentData d = data_for(opts.data, job.cfg);
    const TrainResult result = run_variant(job.cfg, d, [&](const EpochLog& e, const Model&) {
      if (!verbose) return;
      std::printf("epoch %2zu stage %d lr %.0e loss %.4f bce %.4f mmd %.4f recon %.4f domain %.4f",
                  e.epoch, e.stage, e.learning_rate, e.loss, e.bce, e.mmd, e.recon, e.domain);
      if (e.selection_w_f1) std::printf(" valid_w_f1 %.4f", *e.selection_w_f1);
      std::printf("\n");
      std::fflush(stdout);
    });
    save_checkpoint(result.checkpoint, (fs::path(job.dir) / kCheckpointFile).string());
    std::ostringstream log;
    write_log_jsonl(log, result.log);
    write_text(fs::path(job.dir) / "train_log.jsonl", log.str());
    write_manifest(job.dir, "train", common, job.cfg.hash(), job.cfg.train.seed,
                   {kCheckpointFile, "train_log.jsonl"});
    std::lock_guard<std::mutex> lock(print_mutex);
    std::printf("%s seed %llu: selected epoch %zu (valid w-F1 %.4f) -> %s\n",
                variant_name(job.cfg.train.variant).c_str(),
                static_cast<unsigned long long>(job.cfg.train.seed), result.best_epoch,
                result.checkpoint.selection_metric, job.dir.c_str());
    std::fflush(stdout);
  };

  const std::size_t workers = worker_count(jobs.size());
  if (workers == 1) {
    for (const auto& job : jobs) run(job);
    return 0;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs.size(); i = next++) {
        try {
          run(jobs[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return 0;
}

int eval(const CommonOptions& common, const EvalOptions& opts) {
  if (opts.checkpoints.empty()) throw ConfigError("eval: --checkpoint is required");
  ensure_dir(common.out);
  std::vector<MetricReport> target_runs, source_runs;
  ordered_json runs = ordered_json::array();
  std::optional<std::uint64_t> hash;
  std::size_t k = 0;
  double threshold = 0.0;
  for (const auto& path : opts.checkpoints) {
    const Checkpoint ckpt = load_checkpoint(path);
    ExperimentConfig cfg = checkpoint_config(ckpt);
    apply_evaluation_overrides(cfg, common);
    if (opts.k) cfg.eval_k = *opts.k;
    cfg.validate();
    if (k != 0 && (cfg.eval_k != k || cfg.eval_threshold != threshold)) {
      throw ConfigError("eval: checkpoints disagree on eval.k or eval.threshold");
    }
    k = cfg.eval_k;
    threshold = cfg.eval_threshold;
    if (!hash) hash = ckpt.config_hash;
    const ExperimentData d = data_for(opts.data, cfg);
    const MetricReport t = compute_metrics(predict_target(ckpt, d.target.test),
                                           label_tensor(d.target.test), k, threshold);
    const MetricReport s = compute_metrics(predict_target(ckpt, d.source.test),
                                           label_tensor(d.source.test), k, threshold);
    target_runs.push_back(t);
    source_runs.push_back(s);
    runs.push_back({{"checkpoint", path},
                    {"variant", ckpt.variant},
                    {"seed", cfg.train.seed},
                    {"best_epoch", ckpt.best_epoch},
                    {"target", metrics_json(t)},
                    {"source", metrics_json(s)}});
    std::printf("%s seed %llu: target w-F1 %.4f R@%zu %.4f AUROC %.4f | source w-F1 %.4f\n",
                ckpt.variant.c_str(), static_cast<unsigned long long>(cfg.train.seed), t.w_f1, k,
                t.recall_at_k, t.auroc, s.w_f1);
  }
  ordered_json report;
  report["version"] = 1;
  report["k"] = k;
  report["threshold"] = threshold;
  report["target"] = summary_json(target_runs);
  report["source"] = summary_json(source_runs);
  report["runs"] = runs;
  write_text(fs::path(common.out) / "metrics.json", report.dump(2) + "\n");
  write_manifest(common.out, "eval", common, hash, std::nullopt, {"metrics.json"});
  return 0;
}

int interpret(const CommonOptions& common, const InterpretOptions& opts) {
  if (opts.checkpoint.empty()) throw ConfigError("interpret: --checkpoint is required");
  ensure_dir(common.out);
  const Checkpoint ckpt = load_checkpoint(opts.checkpoint);
  ExperimentConfig cfg = checkpoint_config(ckpt);
  apply_evaluation_overrides(cfg, common);
  const ExperimentData d = data_for(opts.data, cfg);
  const auto& records = d.target.test.records;
  const std::size_t n = std::min(cfg.interpret.n_patients, records.size());
  const auto report =
      quadrant_report(ckpt, std::span(records.data(), n), cfg.interpret);
  const auto written = emit_plots(report, common.out);
  std::vector<std::string> files;
  for (const auto& p : written) files.push_back(fs::path(p).filename().string());
  write_manifest(common.out, "interpret", common, ckpt.config_hash, cfg.train.seed, files);

  std::size_t above = 0, codes = 0;
  std::array<std::size_t, 4> quadrants{};
  for (const auto& p : report.patients) {
    for (const auto& dim : p.dimensions) {
      for (const auto& c : dim.codes) {
        ++codes;
        above += c.label_delta > cfg.interpret.label_threshold;
      }
      for (std::size_t q = 0; q < 4; ++q) quadrants[q] += dim.quadrant_counts[q];
    }
  }
  std::printf("%zu patients, %zu mapped codes, %zu above %.2f; HH %zu HL %zu LH %zu LL %zu\n",
              report.patients.size(), codes, above, cfg.interpret.label_threshold, quadrants[0],
              quadrants[1], quadrants[2], quadrants[3]);
  return 0;
}

int probe(const CommonOptions& common, const ProbeOptions& opts) {
  if (opts.base.empty() || opts.checkpoint.empty()) {
    throw ConfigError("probe: --base and --checkpoint are required");
  }
  ensure_dir(common.out);
  const Checkpoint base = load_checkpoint(opts.base);
  const Checkpoint full = load_checkpoint(opts.checkpoint);
  ExperimentConfig cfg = checkpoint_config(full);
  apply_evaluation_overrides(cfg, common);
  const ExperimentData d = data_for(opts.data, cfg);
  const ProbeResult r = probe_cosines(base, full, d.source.test, d.target.test, cfg.probe);
  write_text(fs::path(common.out) / "probe.json", probe_json(r));
  write_manifest(common.out, "probe", common, full.config_hash, cfg.train.seed, {"probe.json"});
  std::printf("cos(Wc(v0),Wd(v0)) %.4f  cos(Wc(v0),Wc(z)) %.4f  cos(Wc(v0),Wc(v)) %.4f\n",
              r.mean.class_vs_domain_v0, r.mean.v0_vs_z, r.mean.v0_vs_v);
  std::printf("domain probe accuracy: v %.4f  z %.4f\n", r.domain_accuracy_v, r.domain_accuracy_z);
  return 0;
}

int gradcheck(const CommonOptions& common) {
  const std::uint64_t seed = common.seed.value_or(0);
  return report_suites(verify_gradients(seed), common, "gradcheck", seed);
}

int verify_math(const CommonOptions& common) {
  const std::uint64_t seed = common.seed.value_or(0);
  return report_suites(orthocare::verify_math(seed), common, "verify-math", seed);
}

}  // namespace orthocare::cli
