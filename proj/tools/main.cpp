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

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "orthocare/error.hpp"

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace {

using orthocare::cli::CommonOptions;

void add_common(CLI::App* cmd, CommonOptions& common, bool needs_out) {
  cmd->add_option("--config", common.config, "config file, or 'default'");
  cmd->add_option("--seed", common.seed, "sets data.seed and train.seed");
  auto* out = cmd->add_option("--out", common.out, "output directory");
  if (needs_out) out->required();
  cmd->add_option("--set", common.set, "override one config key (key=value)")
      ->take_first()
      ->allow_extra_args(false);
}

int fail(const char* kind, const std::string& message) {
  std::fprintf(stderr, "error: %s: %s\n", kind, message.c_str());
  return std::string(kind) == "internal" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Training allocates and frees large temporaries every step; keep them on
  // the heap instead of returning pages to the kernel each time.
  mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024);
#endif

  CLI::App app{"orthocare: domain-adaptive diagnosis prediction on synthetic EHR data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ORTHOCARE_VERSION);

  CommonOptions common;
  for (int i = 0; i < argc; ++i) common.argv.emplace_back(argv[i]);

  orthocare::cli::GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate the synthetic source/target datasets");
  add_common(gen_cmd, common, true);
  gen_cmd->add_option("--shift", gen.shift, "data.shift_strength");

  orthocare::cli::TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "train one variant");
  add_common(train_cmd, common, true);
  train_cmd->add_option("--variant", tr.variant,
                        "full | no_rec_no_dcl | no_orth_no_dcl | euclidean_metric | no_dcl | "
                        "base | oracle");
  train_cmd->add_option("--shift", tr.shift, "data.shift_strength");
  train_cmd->add_option("--data", tr.data, "directory written by gen-data");
  train_cmd->add_option("--seeds", tr.seeds, "comma-separated seeds; one run per seed")
      ->delimiter(',');

  orthocare::cli::EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "score checkpoints on the test splits");
  add_common(eval_cmd, common, true);
  eval_cmd->add_option("--checkpoint", ev.checkpoints, "checkpoint file (repeatable)")
      ->required()
      ->take_all();
  eval_cmd->add_option("--data", ev.data, "directory written by gen-data");
  eval_cmd->add_option("--k", ev.k, "k for recall@k");

  orthocare::cli::InterpretOptions in;
  auto* interp_cmd = app.add_subcommand("interpret", "sparse-dimension ablation report");
  add_common(interp_cmd, common, true);
  interp_cmd->add_option("--checkpoint", in.checkpoint, "checkpoint file")->required();
  interp_cmd->add_option("--data", in.data, "directory written by gen-data");

  orthocare::cli::ProbeOptions pr;
  auto* probe_cmd = app.add_subcommand("probe", "linear-probe cosine analysis");
  add_common(probe_cmd, common, true);
  probe_cmd->add_option("--base", pr.base, "base variant checkpoint (v0)")->required();
  probe_cmd->add_option("--checkpoint", pr.checkpoint, "full variant checkpoint")->required();
  probe_cmd->add_option("--data", pr.data, "directory written by gen-data");

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  add_common(grad_cmd, common, false);
  auto* verify_cmd = app.add_subcommand("verify-math", "projection, metric, MMD and gradient suites");
  add_common(verify_cmd, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    namespace cli = orthocare::cli;
    if (*gen_cmd) return cli::gen_data(common, gen);
    if (*train_cmd) return cli::train(common, tr);
    if (*eval_cmd) return cli::eval(common, ev);
    if (*interp_cmd) return cli::interpret(common, in);
    if (*probe_cmd) return cli::probe(common, pr);
    if (*grad_cmd) return cli::gradcheck(common);
    if (*verify_cmd) return cli::verify_math(common);
  } catch (const orthocare::ValidationError& e) {
    return fail("validation", e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return fail("internal", "no command dispatched");
}
