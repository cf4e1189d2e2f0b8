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

#include "orthocare/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "orthocare/alignment.hpp"
#include "orthocare/gradcheck.hpp"
#include "orthocare/model.hpp"
#include "orthocare/nn.hpp"
#include "orthocare/ortho.hpp"
#include "orthocare/rng.hpp"
#include "orthocare/sae.hpp"
#include "orthocare/trainer.hpp"

namespace orthocare {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Tensor random_tensor(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = rng.uniform(-1.0, 1.0);
  return t;
}

// a^T M b by explicit loops.
double loop_inner(const Tensor& a, const Tensor& b, const Tensor& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) s += a[i] * m.at(i, j) * b[j];
  }
  return s;
}

struct Instance {
  Tensor m, v, v_hat;
};

Instance draw(Rng& rng, std::size_t d = 8) {
  const Tensor w = random_tensor(rng, {2 * d, d});
  return {metric(w), random_tensor(rng, {d}), random_tensor(rng, {d})};
}

std::string fmt(double x) {
  std::ostringstream out;
  out << x;
  return out.str();
}

data::PatientRecord random_record(Rng& rng, std::size_t n_codes, std::size_t n_labels) {
  data::PatientRecord r;
  const std::size_t visits = 1 + rng.uniform_int(0, 2);
  for (std::size_t v = 0; v < visits; ++v) {
    std::vector<std::uint32_t> codes;
    const std::size_t k = 1 + rng.uniform_int(0, 3);
    for (std::size_t c = 0; c < k; ++c) {
      codes.push_back(static_cast<std::uint32_t>(rng.uniform_int(0, n_codes - 1)));
    }
    std::sort(codes.begin(), codes.end());
    codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
    r.visits.push_back(std::move(codes));
  }
  for (std::size_t j = 0; j < n_labels; ++j) r.label.push_back(rng.bernoulli(0.5) ? 1 : 0);
  return r;
}

}  // namespace

SuiteResult verify_closed_form_projection(std::uint64_t seed, std::size_t instances) {
  const auto start = Clock::now();
  SuiteResult r{"closed-form projection vs grid argmin", true, 0, 0.0, 1e-3, {}, 0.0};
  Rng rng(derive_seed(seed, "verify/projection"));
  std::size_t redrawn = 0;
  for (std::size_t t = 0; t < instances; ++t) {
    const double eps = t % 2 == 0 ? 1e-6 : 1e-3;
    Instance in = draw(rng);
    double alpha = project(in.v, in.v_hat, in.m, eps).alpha;
    while (std::abs(alpha) > 9.5) {
      ++redrawn;
      in = draw(rng);
      alpha = project(in.v, in.v_hat, in.m, eps).alpha;
    }
    const double hh = loop_inner(in.v_hat, in.v_hat, in.m);
    const double vh = loop_inner(in.v, in.v_hat, in.m);
    const double vv = loop_inner(in.v, in.v, in.m);
    double best = 0.0, best_val = INFINITY;
    for (long i = -100000; i <= 100000; ++i) {
      const double a = static_cast<double>(i) * 1e-4;
      const double val = vv - 2.0 * a * vh + a * a * (hh + eps);
      if (val < best_val) {
        best_val = val;
        best = a;
      }
    }
    r.worst = std::max(r.worst, std::abs(alpha - best));
    ++r.cases;
  }
  r.passed = r.worst <= r.tolerance;
  r.seconds = seconds_since(start);
  r.detail = "max |alpha - grid| = " + fmt(r.worst) + ", redrawn " + std::to_string(redrawn);
  return r;
}

SuiteResult verify_orthogonality_deviation(std::uint64_t seed, std::size_t instances) {
  const auto start = Clock::now();
  SuiteResult r{"orthogonality deviation closed form", true, 0, 0.0, 1e-10, {}, 0.0};
  Rng rng(derive_seed(seed, "verify/orthogonality"));
  std::size_t monotone_checked = 0, monotone_failed = 0;
  for (std::size_t t = 0; t < instances; ++t) {
    const Instance in = draw(rng);
    const double eps = std::pow(10.0, -1.0 - 7.0 * rng.uniform());
    const double vh = loop_inner(in.v, in.v_hat, in.m);
    const double expect = vh * eps / (loop_inner(in.v_hat, in.v_hat, in.m) + eps);
    const auto d = orthogonality_deviation(in.v, in.v_hat, in.m, eps);
    const double scale = std::max(std::abs(vh), 1e-300);
    r.worst = std::max(r.worst, std::abs(d.measured - expect) / scale);
    ++r.cases;
    if (vh > 0.0) {
      ++monotone_checked;
      double previous = INFINITY;
      for (double e : {1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8}) {
        const double dev = std::abs(orthogonality_deviation(in.v, in.v_hat, in.m, e).measured);
        if (!(dev < previous)) {
          ++monotone_failed;
          break;
        }
        previous = dev;
      }
    }
  }
  r.passed = r.worst <= r.tolerance && monotone_failed == 0 && monotone_checked > 0;
  r.seconds = seconds_since(start);
  r.detail = "max relative error " + fmt(r.worst) + "; eps ladder monotone on " +
             std::to_string(monotone_checked - monotone_failed) + "/" +
             std::to_string(monotone_checked) + " positive instances";
  return r;
}

SuiteResult verify_stability_bound(std::uint64_t seed, std::size_t instances) {
  const auto start = Clock::now();
  SuiteResult r{"stability bound", true, 0, 0.0, 0.0, {}, 0.0};
  Rng rng(derive_seed(seed, "verify/stability"));
  std::size_t violations = 0;
  for (std::size_t t = 0; t < instances; ++t) {
    Instance in = draw(rng, 6);
    // A third of the instances are small perturbations v_hat ~ v.
    if (t % 3 == 0) {
      for (std::size_t i = 0; i < in.v.size(); ++i) in.v_hat[i] = in.v[i] + 0.05 * in.v_hat[i];
    }
    const double eps = std::pow(10.0, -6.0 + 4.0 * rng.uniform());
    const auto s = stability_check(in.v, in.v_hat, in.m, eps);
    if (!(s.lhs <= s.rhs)) ++violations;
    r.worst = std::max(r.worst, s.rhs > 0.0 ? s.lhs / s.rhs : 0.0);
    ++r.cases;
  }
  r.passed = violations == 0;
  r.seconds = seconds_since(start);
  r.detail = std::to_string(violations) + " violations; max lhs/rhs " + fmt(r.worst);
  return r;
}

MetricCheck check_metric(const Tensor& w) {
  const Tensor m = metric(w);
  return {asymmetry(m), min_eigenvalue(m)};
}

bool metric_valid(const MetricCheck& c) {
  return c.asymmetry < 1e-12 && c.min_eigenvalue >= -1e-8;
}

SuiteResult verify_metric_validity(std::uint64_t seed, std::size_t pairs) {
  const auto start = Clock::now();
  SuiteResult r{"dictionary metric validity", true, 0, 0.0, 1e-12, {}, 0.0};
  Rng rng(derive_seed(seed, "verify/metric"));
  bool valid = true;
  for (auto [d, ds] : {std::pair<std::size_t, std::size_t>{8, 16}, {128, 256}}) {
    const Sae sae(d, ds, rng);
    const MetricCheck c = check_metric(sae.weight.value);
    valid = valid && metric_valid(c);
    ++r.cases;
  }
  for (std::size_t t = 0; t < pairs; ++t) {
    const Tensor w = random_tensor(rng, {16, 8});
    const Tensor a = random_tensor(rng, {8});
    const Tensor m = metric(w);
    double wa_sq = 0.0;
    for (std::size_t k = 0; k < w.rows(); ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < w.cols(); ++i) s += w.at(k, i) * a[i];
      wa_sq += s * s;
    }
    r.worst = std::max(r.worst, std::abs(m_norm_sq(a, m) - wa_sq) / std::max(1.0, wa_sq));
    valid = valid && metric_valid(check_metric(w));
    ++r.cases;
  }
  r.passed = valid && r.worst <= r.tolerance;
  r.seconds = seconds_since(start);
  r.detail = std::string(valid ? "symmetric and PSD" : "NOT symmetric/PSD") +
             "; max |a^T M a - ||Wa||^2| (relative) " + fmt(r.worst);
  return r;
}

SuiteResult verify_mmd(std::uint64_t seed) {
  const auto start = Clock::now();
  SuiteResult r{"mmd identities", true, 0, 0.0, 1e-12, {}, 0.0};
  Rng rng(derive_seed(seed, "verify/mmd"));
  bool symmetric = true;
  for (int t = 0; t < 20; ++t) {
    const Tensor a = random_tensor(rng, {6, 4});
    const Tensor b = random_tensor(rng, {5, 4});
    r.worst = std::max(r.worst, std::abs(mmd(a, a, MmdConfig{})));
    symmetric = symmetric && mmd(a, b, MmdConfig{}) == mmd(b, a, MmdConfig{});
    r.cases += 2;
  }
  const Tensor a = Tensor::matrix({{0.0, 1.0}, {0.5, -0.2}, {1.0, 1.0}});
  const Tensor b = Tensor::matrix({{0.2, 0.1}, {-1.0, 0.4}, {0.3, 2.0}});
  MmdConfig single;
  single.kernel_num = 1;
  single.bandwidth = 1.0;
  auto k = [](const Tensor& x, std::size_t i, const Tensor& y, std::size_t j) {
    const double dx = x.at(i, 0) - y.at(j, 0), dy = x.at(i, 1) - y.at(j, 1);
    return std::exp(-(dx * dx + dy * dy));
  };
  double aa = 0.0, bb = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      aa += k(a, i, a, j);
      bb += k(b, i, b, j);
      ab += k(a, i, b, j);
    }
  }
  const double hand_error = std::abs(mmd(a, b, single) - (aa + bb - 2.0 * ab) / 9.0);
  ++r.cases;
  r.passed = symmetric && r.worst < r.tolerance && hand_error < r.tolerance;
  r.seconds = seconds_since(start);
  r.detail = "max mmd(A,A) " + fmt(r.worst) + ", symmetry " + (symmetric ? "exact" : "BROKEN") +
             ", 3-point error " + fmt(hand_error);
  return r;
}

std::vector<SuiteResult> verify_gradients(std::uint64_t seed) {
  constexpr std::size_t kCodes = 12, kLabels = 3;
  ExperimentConfig cfg;
  cfg.model = ModelConfig{8, 8, 8, 16, 16, 8};
  cfg.data.n_codes = kCodes;
  cfg.data.n_labels = kLabels;
  Model model(cfg.model, kCodes, kLabels, derive_seed(seed, "verify/gradients"));
  Rng rng(derive_seed(seed, "verify/records"));
  std::vector<data::PatientRecord> src, tgt;
  for (int i = 0; i < 4; ++i) src.push_back(random_record(rng, kCodes, kLabels));
  for (int i = 0; i < 4; ++i) tgt.push_back(random_record(rng, kCodes, kLabels));
  std::vector<const data::PatientRecord*> s, t;
  for (const auto& x : src) s.push_back(&x);
  for (const auto& x : tgt) t.push_back(&x);
  const Tensor labels = label_matrix(s, kLabels);

  auto params_of = [](std::initializer_list<std::vector<Parameter*>> groups) {
    std::vector<Parameter*> out;
    for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
    return out;
  };
  auto run = [&](const std::string& name, const ad::ParameterObjective& f,
                 const std::vector<Parameter*>& params) {
    const auto start = Clock::now();
    SuiteResult r{name, true, params.size(), 0.0, 1e-4, {}, 0.0};
    const auto report = ad::finite_difference_report(f, params);
    r.worst = report.max_relative_error;
    r.passed = r.worst < r.tolerance;
    r.seconds = seconds_since(start);
    r.detail = "max relative error " + fmt(r.worst) + " over " + std::to_string(params.size()) +
               " tensors (worst: " + params[report.worst_index]->name + ")";
    return r;
  };

  std::vector<SuiteResult> out;
  out.push_back(run(
      "gradient: label loss",
      [&](ad::Graph& g) {
        ad::Var vs = model.encoder.encode_batch(g, s);
        ad::Var vt = model.encoder.encode_batch(g, t);
        return label_loss(vs, model.label_head.probabilities(g, vs), labels, vt, 1.0, cfg.mmd)
            .total;
      },
      params_of({model.encoder.parameters(), model.label_head.parameters()})));

  out.push_back(run(
      "gradient: reconstruction loss",
      [&](ad::Graph& g) {
        ad::Var v = ad::concat(model.encoder.encode_batch(g, s), model.encoder.encode_batch(g, t));
        return recon_loss(g, model.sae, v, ReconOptions{cfg.loss.gamma}).total;
      },
      params_of({model.encoder.parameters(), model.sae.parameters()})));

  out.push_back(run(
      "gradient: domain loss",
      [&](ad::Graph& g) {
        ad::Var v = ad::concat(model.encoder.encode_batch(g, s), model.encoder.encode_batch(g, t));
        ad::Var v_hat = model.sae.decode(g, model.sae.encode(g, v));
        const auto proj = project_rows(MetricView::dictionary(g.parameter(model.sae.weight)), v,
                                       v_hat, cfg.train.epsilon);
        return domain_loss(g, model.domain_head, ad::slice_rows(proj.z, 0, 4),
                           ad::slice_rows(proj.z, 4, 4));
      },
      params_of({model.encoder.parameters(), model.sae.parameters(),
                 model.domain_head.parameters()})));

  const VariantPlan plan = plan_for(Variant::kFull, cfg.loss);
  out.push_back(run(
      "gradient: stage-3 combined loss",
      [&](ad::Graph& g) { return step_losses(g, model, cfg, plan, 3, s, t).total; },
      model.parameters()));
  return out;
}

std::vector<SuiteResult> verify_math(std::uint64_t seed) {
  std::vector<SuiteResult> out;
  out.push_back(verify_closed_form_projection(seed));
  out.push_back(verify_orthogonality_deviation(seed));
  out.push_back(verify_stability_bound(seed));
  out.push_back(verify_metric_validity(seed));
  out.push_back(verify_mmd(seed));
  for (auto& r : verify_gradients(seed)) out.push_back(std::move(r));
  return out;
}

}  // namespace orthocare
