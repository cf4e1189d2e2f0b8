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

#include "orthocare/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "orthocare/error.hpp"

namespace orthocare {

namespace {

constexpr char kMagic[4] = {'O', 'C', 'K', 'P'};

class Writer {
 public:
  void u32(std::uint32_t x) { le(x, 4); }
  void u64(std::uint64_t x) { le(x, 8); }
  void f64(double x) { le(std::bit_cast<std::uint64_t>(x), 8); }
  void str(const std::string& s) {
    u64(s.size());
    out_.append(s);
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  void values(const Tensor& t) {
    for (double x : t.data()) f64(x);
  }
  std::string take() { return std::move(out_); }

 private:
  void le(std::uint64_t x, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string str() {
    const auto n = u64();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void raw(char* p, std::size_t n) {
    need(n);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  void values(Tensor& t) {
    need(8 * t.size());
    for (auto& x : t.data()) x = f64();
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > in_.size() - pos_) throw InputError("checkpoint: truncated payload");
  }
  std::uint64_t le(int bytes) {
    need(static_cast<std::uint64_t>(bytes));
    std::uint64_t x = 0;
    for (int i = 0; i < bytes; ++i) {
      x |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(bytes);
    return x;
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

const CheckpointTensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw InputError("checkpoint: no tensor named '" + name + "'");
}

std::string serialize(const Checkpoint& c) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(c.config_text);
  w.u64(c.config_hash);
  w.str(c.variant);
  w.u64(c.epoch);
  w.u64(c.best_epoch);
  w.u32(c.stage);
  w.f64(c.selection_metric);
  w.str(c.rng_state);
  w.u64(c.tensors.size());
  for (const auto& t : c.tensors) {
    w.str(t.name);
    w.u64(t.value.rank());
    for (auto e : t.value.shape()) w.u64(e);
    w.values(t.value);
    w.values(t.adam_m);
    w.values(t.adam_v);
    w.u64(t.adam_steps);
  }
  return w.take();
}

Checkpoint deserialize(const std::string& bytes) {
  Reader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw InputError("checkpoint: bad magic");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw InputError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint c;
  c.config_text = r.str();
  c.config_hash = r.u64();
  c.variant = r.str();
  c.epoch = r.u64();
  c.best_epoch = r.u64();
  c.stage = r.u32();
  c.selection_metric = r.f64();
  c.rng_state = r.str();
  const auto n = r.u64();
  for (std::uint64_t k = 0; k < n; ++k) {
    CheckpointTensor t;
    t.name = r.str();
    const auto rank = r.u64();
    if (rank > 2) throw InputError("checkpoint: tensor rank " + std::to_string(rank));
    Shape shape;
    for (std::uint64_t i = 0; i < rank; ++i) shape.push_back(r.u64());
    t.value = Tensor(shape);
    t.adam_m = Tensor(shape);
    t.adam_v = Tensor(shape);
    r.values(t.value);
    r.values(t.adam_m);
    r.values(t.adam_v);
    t.adam_steps = r.u64();
    c.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw InputError("checkpoint: trailing bytes");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const std::string bytes = serialize(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

Checkpoint capture(const ExperimentConfig& config, const Model& model, const AdamState& adam) {
  Checkpoint c;
  c.config_text = config.to_text();
  c.config_hash = config.hash();
  c.variant = variant_name(config.train.variant);
  const auto params = model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    CheckpointTensor t;
    t.name = params[k]->name;
    t.value = params[k]->value;
    t.adam_m = k < adam.m.size() ? adam.m[k] : Tensor::zeros_like(t.value);
    t.adam_v = k < adam.v.size() ? adam.v[k] : Tensor::zeros_like(t.value);
    t.adam_steps = k < adam.steps.size() ? adam.steps[k] : 0;
    c.tensors.push_back(std::move(t));
  }
  return c;
}

ExperimentConfig checkpoint_config(const Checkpoint& ckpt) {
  std::istringstream in(ckpt.config_text);
  ExperimentConfig c;
  c.apply(parse_key_values(in, "checkpoint config"));
  if (c.hash() != ckpt.config_hash) throw InputError("checkpoint: config hash mismatch");
  return c;
}

Model restore_model(const Checkpoint& ckpt) {
  const ExperimentConfig cfg = checkpoint_config(ckpt);
  Model model(cfg.model, cfg.data.n_codes, cfg.data.n_labels, cfg.train.seed);
  auto params = model.parameters();
  if (params.size() != ckpt.tensors.size()) {
    throw InputError("checkpoint: expected " + std::to_string(params.size()) + " tensors, found " +
                     std::to_string(ckpt.tensors.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& t = ckpt.tensors[k];
    if (t.name != params[k]->name || t.value.shape() != params[k]->value.shape()) {
      throw InputError("checkpoint: tensor '" + t.name + "' " + shape_string(t.value.shape()) +
                       " does not match '" + params[k]->name + "' " +
                       shape_string(params[k]->value.shape()));
    }
    params[k]->value = t.value;
  }
  return model;
}

AdamState restore_adam(const Checkpoint& ckpt) {
  AdamState s;
  for (const auto& t : ckpt.tensors) {
    s.m.push_back(t.adam_m);
    s.v.push_back(t.adam_v);
    s.steps.push_back(t.adam_steps);
  }
  return s;
}

}  // namespace orthocare
