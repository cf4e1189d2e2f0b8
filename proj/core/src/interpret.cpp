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

#include "orthocare/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "orthocare/error.hpp"
#include "orthocare/ortho.hpp"
#include "orthocare/sae.hpp"
#include "orthocare/trainer.hpp"

namespace orthocare {
namespace {

Tensor as_row(const Tensor& v) { return v.reshaped({1, v.size()}); }

}  // namespace

std::vector<std::size_t> top_k_dims(const Tensor& s, std::size_t k) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] > 0.0) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(s[a]) > std::abs(s[b]);
  });
  if (idx.size() > k) idx.resize(k);
  return idx;
}

Tensor ablate(const Tensor& s, std::size_t dim) {
  if (dim >= s.size()) {
    throw InputError("ablate: dimension " + std::to_string(dim) + " out of range for " +
                     shape_string(s.shape()));
  }
  Tensor out = s;
  out[dim] = 0.0;
  return out;
}

data::PatientRecord remove_code(const data::PatientRecord& record, std::size_t code) {
  data::PatientRecord out;
  out.label = record.label;
  out.domain = record.domain;
  for (const auto& visit : record.visits) {
    std::vector<std::uint32_t> kept;
    for (auto c : visit) {
      if (c != code) kept.push_back(c);
    }
    if (!kept.empty()) out.visits.push_back(std::move(kept));
  }
  return out;
}

Interpreter::Interpreter(const Checkpoint& checkpoint)
    : model_(restore_model(checkpoint)), stage_(static_cast<int>(checkpoint.stage)) {
  const ExperimentConfig cfg = checkpoint_config(checkpoint);
  epsilon_ = cfg.train.epsilon;
  if (model_.n_labels() > model_.n_codes()) {
    throw InputError("interpret: " + std::to_string(model_.n_labels()) +
                     " output codes exceed the input vocabulary of " +
                     std::to_string(model_.n_codes()));
  }
  const VariantPlan plan = plan_for(cfg.train.variant, cfg.loss);
  variant_ = variant_name(cfg.train.variant);
  sae_trained_ = plan.weights.lambda2 != 0.0;
  domain_trained_ = plan.weights.lambda3 != 0.0;
  metric_ = plan.project_euclidean ? Tensor::identity(model_.sae.input_dim())
                                   : metric(model_.sae.weight.value);
}

void Interpreter::require_stage(int needed, const char* what) const {
  if (stage_ < needed) {
    throw InputError(std::string(what) + ": checkpoint reached stage " + std::to_string(stage_) +
                     ", needs stage " + std::to_string(needed));
  }
  if (!sae_trained_ || (needed >= 3 && !domain_trained_)) {
    throw InputError(std::string(what) + ": variant " + variant_ + " does not train the " +
                     (sae_trained_ ? "domain head" : "dictionary"));
  }
}

Tensor Interpreter::representation(const data::PatientRecord& record) {
  const std::size_t n_codes = model_.n_codes();
  Tensor bag({1, n_codes});
  if (!record.visits.empty()) {
    const data::PatientRecord* one[] = {&record};
    bag = bag_matrix(one, n_codes);
  }
  ad::Graph g;
  ad::Var pooled = ad::matmul(g.constant(std::move(bag)), g.constant(model_.encoder.embeddings.value));
  return model_.encoder.from_pooled(g, pooled).value().reshaped({model_.encoder.config().out_dim});
}

Tensor Interpreter::sparse_code(const Tensor& v) { return sae_encode(model_.sae.weight.value, v); }

Tensor Interpreter::code_probabilities(const Tensor& s) {
  const Tensor v_hat = sae_decode(model_.sae.weight.value, s);
  ad::Graph g;
  return model_.label_head.probabilities(g, g.constant(as_row(v_hat)))
      .value()
      .reshaped({model_.n_labels()});
}

double Interpreter::domain_probability(const Tensor& v, const Tensor& v_hat) {
  const ProjectionResult p = project(v, v_hat, metric_, epsilon_);
  ad::Graph g;
  return model_.domain_head.target_probability(g, g.constant(as_row(p.z))).value()[0];
}

Tensor Interpreter::delta_prob_label(const data::PatientRecord& record, std::size_t dim) {
  require_stage(2, "delta_prob_label");
  const Tensor s = sparse_code(representation(record));
  const Tensor p = code_probabilities(s);
  const Tensor p_tilde = code_probabilities(ablate(s, dim));
  Tensor out = p;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = std::abs(p[j] - p_tilde[j]);
  return out;
}

DomainDelta Interpreter::delta_prob_domain(const data::PatientRecord& record, std::size_t dim,
                                           std::span<const std::size_t> codes) {
  require_stage(3, "delta_prob_domain");
  const Tensor& w = model_.sae.weight.value;
  const Tensor v = representation(record);
  const Tensor s = sparse_code(v);
  const double base = domain_probability(v, sae_decode(w, s));

  DomainDelta out;
  out.dimension = std::abs(base - domain_probability(v, sae_decode(w, ablate(s, dim))));
  for (std::size_t code : codes) {
    if (code >= model_.n_codes()) {
      throw InputError("delta_prob_domain: code " + std::to_string(code) + " outside vocabulary");
    }
    const data::PatientRecord removed = remove_code(record, code);
    if (removed == record) {
      out.per_code.push_back(0.0);
      continue;
    }
    const Tensor v_removed = representation(removed);
    const Tensor v_hat = sae_decode(w, sparse_code(v_removed));
    out.per_code.push_back(std::abs(base - domain_probability(v_removed, v_hat)));
  }
  return out;
}

std::string quadrant_name(Quadrant q) {
  switch (q) {
    case Quadrant::kHH: return "HH";
    case Quadrant::kHL: return "HL";
    case Quadrant::kLH: return "LH";
    case Quadrant::kLL: return "LL";
  }
  return "?";
}

void annotate_codes(std::vector<CodeAttribution>& codes, const AblationConfig& cfg) {
  std::vector<std::size_t> order(codes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (codes[a].domain_impact != codes[b].domain_impact) {
      return codes[a].domain_impact > codes[b].domain_impact;
    }
    return codes[a].code < codes[b].code;
  });
  const std::size_t n = std::min(cfg.domain_rank_n, codes.size() / 2);
  for (std::size_t r = 0; r < order.size(); ++r) {
    auto& c = codes[order[r]];
    c.domain_class = r < n                       ? DomainClass::kSensitive
                     : r >= order.size() - n     ? DomainClass::kInsensitive
                                                 : DomainClass::kUnannotated;
    if (c.domain_class == DomainClass::kUnannotated) {
      c.quadrant.reset();
      continue;
    }
    const bool high_label = c.label_delta > cfg.label_threshold;
    const bool sensitive = c.domain_class == DomainClass::kSensitive;
    c.quadrant = high_label ? (sensitive ? Quadrant::kHH : Quadrant::kHL)
                            : (sensitive ? Quadrant::kLH : Quadrant::kLL);
  }
}

InterpretationReport quadrant_report(const Checkpoint& checkpoint,
                                     std::span<const data::PatientRecord> records,
                                     const AblationConfig& cfg) {
  cfg.validate();
  Interpreter interp(checkpoint);
  InterpretationReport report;
  report.config = cfg;
  report.variant = checkpoint.variant;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& record = records[i];
    const Tensor s = interp.sparse_code(interp.representation(record));
    PatientReport patient;
    patient.record_index = i;
    for (std::size_t dim : top_k_dims(s, cfg.top_k)) {
      DimensionReport d;
      d.dim = dim;
      d.activation = s[dim];
      const Tensor delta = interp.delta_prob_label(record, dim);
      d.label_delta.assign(delta.data().begin(), delta.data().end());

      std::vector<std::size_t> mapped;
      for (std::size_t j = 0; j < delta.size(); ++j) {
        if (delta[j] > 0.0) mapped.push_back(j);
      }
      std::stable_sort(mapped.begin(), mapped.end(),
                       [&](std::size_t a, std::size_t b) { return delta[a] > delta[b]; });
      if (mapped.size() > cfg.max_codes_per_dim) mapped.resize(cfg.max_codes_per_dim);

      const DomainDelta dd = interp.delta_prob_domain(record, dim, mapped);
      d.domain_delta = dd.dimension;
      for (std::size_t m = 0; m < mapped.size(); ++m) {
        d.codes.push_back(
            {mapped[m], delta[mapped[m]], dd.per_code[m], DomainClass::kUnannotated, std::nullopt});
      }
      annotate_codes(d.codes, cfg);
      for (const auto& c : d.codes) {
        if (c.quadrant) ++d.quadrant_counts[static_cast<std::size_t>(*c.quadrant)];
      }
      patient.dimensions.push_back(std::move(d));
    }
    report.patients.push_back(std::move(patient));
  }
  return report;
}

std::string report_json(const InterpretationReport& report) {
  using nlohmann::ordered_json;
  ordered_json root;
  root["version"] = kReportVersion;
  root["variant"] = report.variant;
  root["config"] = {{"top_k", report.config.top_k},
                    {"label_threshold", report.config.label_threshold},
                    {"domain_rank_n", report.config.domain_rank_n},
                    {"max_codes_per_dim", report.config.max_codes_per_dim}};
  ordered_json patients = ordered_json::array();
  for (const auto& p : report.patients) {
    ordered_json dims = ordered_json::array();
    for (const auto& d : p.dimensions) {
      ordered_json codes = ordered_json::array();
      for (const auto& c : d.codes) {
        const char* cls = c.domain_class == DomainClass::kSensitive     ? "sensitive"
                          : c.domain_class == DomainClass::kInsensitive ? "insensitive"
                                                                        : "unannotated";
        codes.push_back({{"code", c.code},
                         {"label_delta", c.label_delta},
                         {"domain_impact", c.domain_impact},
                         {"domain_class", cls},
                         {"quadrant", c.quadrant ? ordered_json(quadrant_name(*c.quadrant))
                                                 : ordered_json(nullptr)}});
      }
      dims.push_back({{"dim", d.dim},
                      {"activation", d.activation},
                      {"domain_delta", d.domain_delta},
                      {"label_delta", d.label_delta},
                      {"codes", codes},
                      {"quadrant_counts",
                       {{"HH", d.quadrant_counts[0]},
                        {"HL", d.quadrant_counts[1]},
                        {"LH", d.quadrant_counts[2]},
                        {"LL", d.quadrant_counts[3]}}}});
    }
    patients.push_back({{"record_index", p.record_index}, {"dimensions", dims}});
  }
  root["patients"] = patients;
  return root.dump(2) + "\n";
}

namespace {

constexpr double kWidth = 640, kHeight = 400, kLeft = 60, kRight = 20, kTop = 30, kBottom = 60;

struct Point {
  std::string label;
  double label_delta;
  double domain_impact;
  DomainClass cls;
};

std::vector<Point> collect(const InterpretationReport& report, std::optional<std::size_t> patient) {
  if (patient && *patient >= report.patients.size()) {
    throw InputError("plot: patient " + std::to_string(*patient) + " not in report");
  }
  std::vector<Point> pts;
  for (std::size_t i = 0; i < report.patients.size(); ++i) {
    if (patient && i != *patient) continue;
    for (const auto& d : report.patients[i].dimensions) {
      for (const auto& c : d.codes) {
        std::string label = "d" + std::to_string(d.dim) + ":c" + std::to_string(c.code);
        if (!patient) label = "p" + std::to_string(report.patients[i].record_index) + " " + label;
        pts.push_back({std::move(label), c.label_delta, c.domain_impact, c.domain_class});
      }
    }
  }
  return pts;
}

std::ostringstream svg_open(const std::string& title) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
      << "<title>" << title << "</title>\n"
      << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight
      << "\" height=\"" << kHeight - kTop - kBottom
      << "\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n";
  return out;
}

const char* class_colour(DomainClass c) {
  switch (c) {
    case DomainClass::kSensitive: return "#c0392b";
    case DomainClass::kInsensitive: return "#2471a3";
    case DomainClass::kUnannotated: break;
  }
  return "#999999";
}

}  // namespace

std::string scatter_svg(const InterpretationReport& report, std::optional<std::size_t> patient) {
  const auto pts = collect(report, patient);
  const double t = report.config.label_threshold;
  double x_max = t, y_max = 0.0;
  for (const auto& p : pts) {
    x_max = std::max(x_max, p.label_delta);
    y_max = std::max(y_max, p.domain_impact);
  }
  x_max *= 1.1;
  y_max = y_max > 0.0 ? y_max * 1.1 : 1.0;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + pw * x / x_max; };
  auto sy = [&](double y) { return kTop + ph * (1.0 - y / y_max); };

  auto out = svg_open("label impact vs domain impact");
  out << "<line x1=\"" << sx(t) << "\" y1=\"" << kTop << "\" x2=\"" << sx(t) << "\" y2=\""
      << kTop + ph << "\" stroke=\"#333\" stroke-dasharray=\"6,4\"/>\n";
  for (const auto& p : pts) {
    out << "<circle cx=\"" << sx(p.label_delta) << "\" cy=\"" << sy(p.domain_impact)
        << "\" r=\"4\" fill=\"" << class_colour(p.cls) << "\"><title>" << p.label
        << "</title></circle>\n";
  }
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 15
      << "\" text-anchor=\"middle\" font-size=\"12\">label delta prob (max "
      << std::setprecision(4) << x_max << ")</text>\n";
  out << "<text x=\"15\" y=\"" << kTop + ph / 2 << "\" transform=\"rotate(-90 15 "
      << kTop + ph / 2 << ")\" text-anchor=\"middle\" font-size=\"12\">domain impact (max "
      << y_max << ")</text>\n";
  out << "</svg>\n";
  return out.str();
}

std::string bar_chart_svg(const InterpretationReport& report, std::optional<std::size_t> patient) {
  const auto pts = collect(report, patient);
  const double t = report.config.label_threshold;
  double y_max = t;
  for (const auto& p : pts) y_max = std::max(y_max, p.label_delta);
  y_max *= 1.1;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto sy = [&](double y) { return kTop + ph * (1.0 - y / y_max); };

  auto out = svg_open("label delta prob per code");
  const double slot = pts.empty() ? pw : pw / static_cast<double>(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double x = kLeft + slot * static_cast<double>(i) + slot * 0.15;
    const double y = sy(pts[i].label_delta);
    out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << slot * 0.7 << "\" height=\""
        << kTop + ph - y << "\" fill=\"" << class_colour(pts[i].cls) << "\"><title>"
        << pts[i].label << "</title></rect>\n";
    const double cx = x + slot * 0.35, cy = kTop + ph + 8;
    out << "<text x=\"" << cx << "\" y=\"" << cy << "\" transform=\"rotate(60 " << cx << ' ' << cy
        << ")\" font-size=\"8\">" << pts[i].label << "</text>\n";
  }
  out << "<line x1=\"" << kLeft << "\" y1=\"" << sy(t) << "\" x2=\"" << kLeft + pw << "\" y2=\""
      << sy(t) << "\" stroke=\"#333\" stroke-dasharray=\"6,4\"/>\n";
  out << "<text x=\"15\" y=\"" << kTop + ph / 2 << "\" transform=\"rotate(-90 15 "
      << kTop + ph / 2 << ")\" text-anchor=\"middle\" font-size=\"12\">label delta prob (max "
      << std::setprecision(4) << y_max << ")</text>\n";
  out << "</svg>\n";
  return out.str();
}

std::vector<std::string> emit_plots(const InterpretationReport& report,
                                    const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  std::vector<std::string> written;
  auto write = [&](const std::string& name, const std::string& text) {
    const std::string path = (fs::path(out_dir) / name).string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("write failed: " + path);
    written.push_back(path);
  };
  write("report.json", report_json(report));
  write("scatter.svg", scatter_svg(report));
  write("bars.svg", bar_chart_svg(report));
  for (std::size_t i = 0; i < report.patients.size(); ++i) {
    const std::string stem = "patient_" + std::to_string(report.patients[i].record_index);
    write(stem + "_scatter.svg", scatter_svg(report, i));
    write(stem + "_bars.svg", bar_chart_svg(report, i));
  }
  return written;
}

}  // namespace orthocare
