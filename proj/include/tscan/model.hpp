/*
 * Copyright 2026 The TSCAN Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// The temporal-spatial correlation attention network.
//
// A sample [t, d] is cut into n equal time chunks. Each branch runs one
// Encoder on chunk 0 and a chain of n-1 Fusion-Encoders, where block j
// cross-attends from its own chunk to the output of block j-1. The spatial
// branch feeds transposed chunks [d, t/n] so that tokens are variables, which
// carry no positional encoding. The two branch outputs are mean-pooled over
// tokens and fused into a prediction.

#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tscan/autodiff.hpp"
#include "tscan/layers.hpp"
#include "tscan/param_store.hpp"
#include "tscan/tensor.hpp"

namespace tscan {

enum class Fusion { kTemporalOnly, kSpatialOnly, kConcatenate, kAdding, kBilinear, kMaxPool };
enum class Task { kIhm, kLos, kDecompensation, kPhenotype };
enum class Branch { kTemporal, kSpatial };

inline const std::vector<Fusion>& all_fusions() {
  static const std::vector<Fusion> v{Fusion::kTemporalOnly, Fusion::kSpatialOnly,
                                     Fusion::kConcatenate,  Fusion::kAdding,
                                     Fusion::kBilinear,     Fusion::kMaxPool};
  return v;
}

inline std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::kTemporalOnly: return "temporal-only";
    case Fusion::kSpatialOnly: return "spatial-only";
    case Fusion::kConcatenate: return "concatenate";
    case Fusion::kAdding: return "adding";
    case Fusion::kBilinear: return "bilinear";
    case Fusion::kMaxPool: return "max-pool";
  }
  return "?";
}

inline Fusion parse_fusion(const std::string& s) {
  for (Fusion f : all_fusions())
    if (to_string(f) == s) return f;
  if (s == "temporal") return Fusion::kTemporalOnly;
  if (s == "spatial") return Fusion::kSpatialOnly;
  if (s == "concat") return Fusion::kConcatenate;
  if (s == "max" || s == "maxpool") return Fusion::kMaxPool;
  throw std::invalid_argument("unknown fusion strategy: " + s);
}

inline std::string to_string(Task t) {
  switch (t) {
    case Task::kIhm: return "ihm";
    case Task::kLos: return "los";
    case Task::kDecompensation: return "decompensation";
    case Task::kPhenotype: return "phenotype";
  }
  return "?";
}

inline Task parse_task(const std::string& s) {
  if (s == "ihm") return Task::kIhm;
  if (s == "los") return Task::kLos;
  if (s == "decomp" || s == "decompensation") return Task::kDecompensation;
  if (s == "pheno" || s == "phenotype") return Task::kPhenotype;
  throw std::invalid_argument("unknown task: " + s);
}

inline std::string to_string(Branch b) { return b == Branch::kTemporal ? "temporal" : "spatial"; }

inline constexpr std::size_t kLosBuckets = 10;
inline constexpr std::size_t kPhenotypeLabels = 25;

inline std::size_t default_classes(Task task) {
  switch (task) {
    case Task::kLos: return kLosBuckets;
    case Task::kPhenotype: return kPhenotypeLabels;
    default: return 2;
  }
}

struct ModelConfig {
  std::size_t t = 48;
  std::size_t d = 1;
  std::size_t n = 4;
  LayerConfig layer;
  Fusion fusion = Fusion::kMaxPool;
  Task task = Task::kIhm;
  std::size_t n_classes = 2;

  bool uses(Branch b) const {
    if (fusion == Fusion::kTemporalOnly) return b == Branch::kTemporal;
    if (fusion == Fusion::kSpatialOnly) return b == Branch::kSpatial;
    return true;
  }

  std::size_t chunk_length() const { return t / n; }

  void validate() const {
    layer.validate();
    if (t == 0 || d == 0 || n == 0) throw std::invalid_argument("t, d and n must be positive");
    if (t % n != 0) {
      throw std::invalid_argument("window length t=" + std::to_string(t) +
                                  " is not divisible by chunk count n=" + std::to_string(n));
    }
    if (n_classes < 2) throw std::invalid_argument("n_classes must be >= 2");
    if (task == Task::kPhenotype && n_classes != kPhenotypeLabels) {
      throw std::invalid_argument("phenotype task uses 25 labels");
    }
    if (task == Task::kLos && n_classes != kLosBuckets) {
      throw std::invalid_argument("length-of-stay task uses 10 buckets");
    }
    if ((task == Task::kIhm || task == Task::kDecompensation) && n_classes != 2) {
      throw std::invalid_argument("binary tasks use 2 classes");
    }
    if (layer.d_model % 2 != 0) throw std::invalid_argument("d_model must be even");
  }
};

inline void to_json(nlohmann::json& j, const LayerConfig& c) {
  j = {{"d_model", c.d_model}, {"n_heads", c.n_heads}, {"d_ff", c.d_ff},
       {"dropout_rate", c.dropout_rate}};
}

inline void from_json(const nlohmann::json& j, LayerConfig& c) {
  const LayerConfig def;
  c.d_model = j.value("d_model", def.d_model);
  c.n_heads = j.value("n_heads", def.n_heads);
  c.d_ff = j.value("d_ff", def.d_ff);
  c.dropout_rate = j.value("dropout_rate", def.dropout_rate);
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"t", c.t},
       {"d", c.d},
       {"n", c.n},
       {"layer", c.layer},
       {"fusion", to_string(c.fusion)},
       {"task", to_string(c.task)},
       {"n_classes", c.n_classes}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  const ModelConfig def;
  c.t = j.value("t", def.t);
  c.d = j.value("d", def.d);
  c.n = j.value("n", def.n);
  if (j.contains("layer")) c.layer = j.at("layer").get<LayerConfig>();
  c.fusion = parse_fusion(j.value("fusion", to_string(def.fusion)));
  c.task = parse_task(j.value("task", to_string(def.task)));
  c.n_classes = j.value("n_classes", default_classes(c.task));
}

// Splits [t, d] (or [B, t, d]) into n contiguous time chunks of t/n rows.
inline std::vector<Tensor> chunk_sample(const Tensor& x, std::size_t n) {
  if (x.rank() < 2) throw ShapeError("chunk_sample: expected [t, d], got " + shape_str(x.shape()));
  const std::size_t t = x.dim(-2);
  if (n == 0 || t % n != 0) {
    throw std::invalid_argument("chunk_sample: t=" + std::to_string(t) +
                                " is not divisible by n=" + std::to_string(n));
  }
  std::vector<Tensor> out;
  const std::size_t len = t / n;
  for (std::size_t j = 0; j < n; ++j) out.push_back(kernels::slice(x, -2, j * len, (j + 1) * len));
  return out;
}

inline std::vector<Var> chunk_sample(Var x, std::size_t n) {
  const std::size_t t = x.dim(-2);
  if (n == 0 || t % n != 0) {
    throw std::invalid_argument("chunk_sample: t=" + std::to_string(t) +
                                " is not divisible by n=" + std::to_string(n));
  }
  std::vector<Var> out;
  const std::size_t len = t / n;
  for (std::size_t j = 0; j < n; ++j) out.push_back(ad::slice(x, -2, j * len, (j + 1) * len));
  return out;
}

// Graph bookkeeping for one Encoder / Fusion-Encoder invocation.
struct BlockTrace {
  std::string name;                // "encoder" or "fusion.<j>"
  Var input;                       // chunk fed to the block
  std::optional<Var> previous;     // z_{j-1}, fusion blocks only
  std::optional<Var> key_projection;  // cross-attention K projection
  Var output;                      // z_j
};

struct BranchState {
  Var z;
  std::vector<AttentionWeights> self_attention;   // one per block
  std::vector<AttentionWeights> cross_attention;  // one per fusion block
  std::vector<BlockTrace> blocks;
};

namespace model_detail {

inline std::string block_prefix(Branch b, std::size_t j) {
  return to_string(b) + (j == 0 ? ".encoder" : ".fusion." + std::to_string(j));
}

inline std::size_t input_width(const ModelConfig& c, Branch b) {
  return b == Branch::kTemporal ? c.d : c.chunk_length();
}

inline std::size_t token_count(const ModelConfig& c, Branch b) {
  return b == Branch::kTemporal ? c.chunk_length() : c.d;
}

// embed(x) + PE, with the table replicated over the batch axis. Tokens
// without a meaningful order (variables) skip the positional term.
inline Var embed_with_position(const ForwardContext& ctx, Var x, const std::string& prefix,
                               const LayerConfig& cfg, bool positional) {
  Var e = layers::linear(ctx, x, prefix + ".embed");
  if (!positional) return e;
  const std::size_t len = x.dim(-2);
  const Tensor pe = positional_encoding(len, cfg.d_model);
  if (x.value().rank() == 2) return ad::add(e, ctx.tape.constant(pe));
  const std::size_t batch = x.dim(0);
  Tensor rep({batch, len, cfg.d_model});
  for (std::size_t b = 0; b < batch; ++b)
    std::copy(pe.data().begin(), pe.data().end(),
              rep.data().begin() + static_cast<std::ptrdiff_t>(b * pe.size()));
  return ad::add(e, ctx.tape.constant(std::move(rep)));
}

}  // namespace model_detail

inline void init_block(ParamStore& store, const std::string& prefix, std::size_t in_width,
                       bool fusion, const LayerConfig& cfg, std::mt19937_64& rng) {
  layers::init_linear(store, prefix + ".embed", in_width, cfg.d_model, rng);
  layers::init_attention(store, prefix + ".msa", cfg, rng);
  if (fusion) {
    layers::init_v_mlp(store, prefix + ".vmlp", cfg, rng);
    layers::init_attention(store, prefix + ".mca", cfg, rng);
  }
  layers::init_ffn(store, prefix + ".ffn", cfg, rng);
}

// z0 = FFN(MSA(embed(x0) + PE)).
inline BranchState encoder_forward(const ForwardContext& ctx, Var x0, const std::string& prefix,
                                   const LayerConfig& cfg, bool positional = true) {
  Var e = model_detail::embed_with_position(ctx, x0, prefix, cfg, positional);
  auto sa = layers::msa(ctx, e, prefix + ".msa", cfg);
  Var z = layers::ffn(ctx, sa.out, prefix + ".ffn", cfg);
  BranchState s;
  s.z = z;
  s.self_attention.push_back(std::move(sa.weights));
  s.blocks.push_back(BlockTrace{"encoder", x0, std::nullopt, std::nullopt, z});
  return s;
}

// Q = MSA(embed(xj) + PE); K = z_prev; V = MLP(concat(Q, K)); z = FFN(MCA(Q, K, V)).
inline BranchState fusion_encoder_forward(const ForwardContext& ctx, Var xj, Var z_prev,
                                          const std::string& prefix, const LayerConfig& cfg,
                                          bool positional = true) {
  if (xj.dim(-2) != z_prev.dim(-2)) {
    throw ShapeError("fusion encoder: chunk has " + std::to_string(xj.dim(-2)) +
                     " tokens but previous state has " + std::to_string(z_prev.dim(-2)));
  }
  Var e = model_detail::embed_with_position(ctx, xj, prefix, cfg, positional);
  auto sa = layers::msa(ctx, e, prefix + ".msa", cfg);
  const Var q = sa.out;
  const Var k = z_prev;
  const Var v = layers::v_mlp(ctx, q, k, prefix + ".vmlp", cfg);
  auto ca = layers::mca(ctx, q, k, v, prefix + ".mca", cfg);
  Var z = layers::ffn(ctx, ca.out, prefix + ".ffn", cfg);
  BranchState s;
  s.z = z;
  s.self_attention.push_back(std::move(sa.weights));
  s.cross_attention.push_back(std::move(ca.weights));
  s.blocks.push_back(BlockTrace{prefix.substr(prefix.find('.') + 1), xj, z_prev,
                                ca.key_projection, z});
  return s;
}

// Folds Encoder + (n-1) Fusion-Encoders over the chunks of x ([t, d] or [B, t, d]).
inline BranchState branch_forward(const ForwardContext& ctx, Var x, Branch branch,
                                  const ModelConfig& cfg) {
  if (x.dim(-2) != cfg.t || x.dim(-1) != cfg.d) {
    throw ShapeError("branch input must be [" + std::to_string(cfg.t) + ", " +
                     std::to_string(cfg.d) + "], got " + shape_str(x.shape()));
  }
  std::vector<Var> chunks = chunk_sample(x, cfg.n);
  const bool temporal = branch == Branch::kTemporal;
  if (!temporal)
    for (Var& c : chunks) c = ad::transpose(c);

  BranchState state =
      encoder_forward(ctx, chunks[0], model_detail::block_prefix(branch, 0), cfg.layer, temporal);
  for (std::size_t j = 1; j < cfg.n; ++j) {
    BranchState step = fusion_encoder_forward(ctx, chunks[j], state.z,
                                              model_detail::block_prefix(branch, j), cfg.layer, temporal);
    state.z = step.z;
    state.self_attention.push_back(std::move(step.self_attention.front()));
    state.cross_attention.push_back(std::move(step.cross_attention.front()));
    state.blocks.push_back(std::move(step.blocks.front()));
  }
  return state;
}

namespace model_detail {

inline Var head_activation(Var logits, Task task) {
  return task == Task::kPhenotype ? ad::sigmoid(logits) : ad::softmax(logits, -1);
}

}  // namespace model_detail

inline void init_heads(ParamStore& store, const ModelConfig& c, std::mt19937_64& rng) {
  const std::size_t dm = c.layer.d_model, k = c.n_classes;
  switch (c.fusion) {
    case Fusion::kTemporalOnly: layers::init_linear(store, "head.temporal", dm, k, rng); break;
    case Fusion::kSpatialOnly: layers::init_linear(store, "head.spatial", dm, k, rng); break;
    case Fusion::kConcatenate: layers::init_linear(store, "head.concat", 2 * dm, k, rng); break;
    case Fusion::kAdding:
      store.add("head.adding.temporal.w", glorot(dm, k, rng));
      store.add("head.adding.spatial.w", glorot(dm, k, rng));
      store.add("head.adding.b", Tensor({k}, 0.0));
      break;
    case Fusion::kBilinear: layers::init_linear(store, "head.bilinear", dm * dm, k, rng); break;
    case Fusion::kMaxPool:
      layers::init_linear(store, "head.temporal", dm, k, rng);
      layers::init_linear(store, "head.spatial", dm, k, rng);
      break;
  }
}

// Mean-pools each branch over tokens and applies the configured fusion head.
// Returns probabilities [B, n_classes].
inline Var fuse_and_predict(const ForwardContext& ctx, const BranchState* temporal,
                            const BranchState* spatial, const ModelConfig& c) {
  if (c.uses(Branch::kTemporal) && !temporal) throw std::invalid_argument("fusion needs the temporal branch");
  if (c.uses(Branch::kSpatial) && !spatial) throw std::invalid_argument("fusion needs the spatial branch");
  if (temporal && spatial) {
    const Shape& a = temporal->z.shape();
    const Shape& b = spatial->z.shape();
    if (a.size() != b.size() || a.back() != b.back() || (a.size() == 3 && a[0] != b[0])) {
      throw ShapeError("branch states disagree: " + shape_str(a) + " vs " + shape_str(b));
    }
  }
  auto pool = [](const BranchState* s) {
    Var z = s->z;
    if (z.value().rank() == 2) z = ad::reshape(z, {1, z.dim(0), z.dim(1)});
    return ad::mean(z, 1);  // [B, d_model]
  };
  switch (c.fusion) {
    case Fusion::kTemporalOnly:
      return model_detail::head_activation(layers::linear(ctx, pool(temporal), "head.temporal"), c.task);
    case Fusion::kSpatialOnly:
      return model_detail::head_activation(layers::linear(ctx, pool(spatial), "head.spatial"), c.task);
    case Fusion::kConcatenate: {
      Var f = ad::concat({pool(temporal), pool(spatial)}, -1);
      return model_detail::head_activation(layers::linear(ctx, f, "head.concat"), c.task);
    }
    case Fusion::kAdding: {
      Var lt = ad::matmul(pool(temporal), ctx.param("head.adding.temporal.w"));
      Var ls = ad::matmul(pool(spatial), ctx.param("head.adding.spatial.w"));
      return model_detail::head_activation(ad::add_row(ad::add(lt, ls), ctx.param("head.adding.b")),
                                           c.task);
    }
    case Fusion::kBilinear: {
      Var pt = pool(temporal), ps = pool(spatial);
      const std::size_t b = pt.dim(0), dm = pt.dim(1);
      Var outer = ad::matmul(ad::reshape(pt, {b, dm, 1}), ad::reshape(ps, {b, 1, dm}));
      Var flat = ad::reshape(outer, {b, dm * dm});
      return model_detail::head_activation(layers::linear(ctx, flat, "head.bilinear"), c.task);
    }
    case Fusion::kMaxPool: {
      Var pt = model_detail::head_activation(layers::linear(ctx, pool(temporal), "head.temporal"), c.task);
      Var ps = model_detail::head_activation(layers::linear(ctx, pool(spatial), "head.spatial"), c.task);
      Var m = ad::maximum(pt, ps);
      // Independent sigmoids are not a distribution; only softmax heads renormalize.
      return c.task == Task::kPhenotype ? m : ad::renormalize(m);
    }
  }
  throw std::logic_error("unhandled fusion");
}

class TscanModel {
 public:
  struct Output {
    Var probs;  // [B, n_classes]
    std::optional<BranchState> temporal;
    std::optional<BranchState> spatial;
  };

  TscanModel(ModelConfig config, std::uint64_t seed)
      : config_(std::move(config)), params_(init_params(config_, seed)) {}

  TscanModel(ModelConfig config, ParamStore params) : config_(std::move(config)), params_(std::move(params)) {
    check_params(params_);
  }

  static ParamStore init_params(const ModelConfig& c, std::uint64_t seed) {
    c.validate();
    std::mt19937_64 rng(seed);
    ParamStore store;
    for (Branch b : {Branch::kTemporal, Branch::kSpatial}) {
      if (!c.uses(b)) continue;
      for (std::size_t j = 0; j < c.n; ++j)
        init_block(store, model_detail::block_prefix(b, j), model_detail::input_width(c, b), j > 0,
                   c.layer, rng);
    }
    init_heads(store, c, rng);
    return store;
  }

  const ModelConfig& config() const noexcept { return config_; }
  const ParamStore& params() const noexcept { return params_; }
  // Optimizer access: values may change, names and shapes must not.
  ParamStore& mutable_params() noexcept { return params_; }

  void set_params(ParamStore p) {
    check_params(p);
    params_ = std::move(p);
  }

  // x is [t, d] or [B, t, d]. Training mode enables dropout drawn from rng.
  Output forward(Tape& tape, const Tensor& x, bool train = false, std::mt19937_64* rng = nullptr) const {
    Tensor input = x.rank() == 2 ? kernels::reshape(x, {1, x.dim(0), x.dim(1)}) : x;
    if (input.rank() != 3 || input.dim(1) != config_.t || input.dim(2) != config_.d) {
      throw ShapeError("model input must be [B, " + std::to_string(config_.t) + ", " +
                       std::to_string(config_.d) + "], got " + shape_str(x.shape()));
    }
    ForwardContext ctx{tape, params_, train, rng};
    Var xv = tape.constant(std::move(input));
    Output out;
    if (config_.uses(Branch::kTemporal)) out.temporal = branch_forward(ctx, xv, Branch::kTemporal, config_);
    if (config_.uses(Branch::kSpatial)) out.spatial = branch_forward(ctx, xv, Branch::kSpatial, config_);
    out.probs = fuse_and_predict(ctx, out.temporal ? &*out.temporal : nullptr,
                                 out.spatial ? &*out.spatial : nullptr, config_);
    return out;
  }

  // Inference-mode probabilities [B, n_classes].
  Tensor predict(const Tensor& x) const {
    Tape tape;
    return forward(tape, x).probs.value();
  }

  std::size_t encoder_count(Branch b) const {
    return params_.names_with_prefix(to_string(b) + ".encoder.").empty() ? 0 : 1;
  }

  std::size_t fusion_encoder_count(Branch b) const {
    std::size_t count = 0;
    while (!params_.names_with_prefix(to_string(b) + ".fusion." + std::to_string(count + 1) + ".").empty())
      ++count;
    return count;
  }

  // Writes <stem>.params (tensor payload) and <stem>.json (ModelConfig).
  void save(const std::string& stem) const {
    params_.save(stem + ".params");
    std::ofstream out(stem + ".json", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + stem + ".json");
    out << nlohmann::json(config_).dump(2) << '\n';
  }

  static TscanModel load(const std::string& stem) {
    std::ifstream in(stem + ".json");
    if (!in) throw std::runtime_error("cannot read model config " + stem + ".json");
    ModelConfig cfg = nlohmann::json::parse(in).get<ModelConfig>();
    cfg.validate();
    return TscanModel(cfg, ParamStore::load(stem + ".params"));
  }

 private:
  void check_params(const ParamStore& p) const {
    const ParamStore expected = init_params(config_, 0);
    if (expected.size() != p.size()) {
      throw std::invalid_argument("checkpoint has " + std::to_string(p.size()) +
                                  " tensors but the config expects " + std::to_string(expected.size()));
    }
    for (const auto& [name, t] : expected) {
      if (!p.contains(name)) throw std::invalid_argument("checkpoint lacks parameter " + name);
      if (p.value(name).shape() != t.shape()) {
        throw std::invalid_argument("parameter " + name + " has shape " +
                                    shape_str(p.value(name).shape()) + ", config expects " +
                                    shape_str(t.shape()));
      }
    }
  }

  ModelConfig config_;
  ParamStore params_;
};

}  // namespace tscan
