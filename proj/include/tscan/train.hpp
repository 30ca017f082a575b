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

// Task losses, optimizers, patient-level splits and the epoch/batch training
// loop with early stopping.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tscan/autodiff.hpp"
#include "tscan/episode.hpp"
#include "tscan/evaluate.hpp"
#include "tscan/model.hpp"
#include "tscan/param_store.hpp"

namespace tscan {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class OptimizerKind { kSgd, kAdam };

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t patience = 5;
  std::uint64_t seed = 0;
  // Positive-class weight for binary tasks. Unset means negatives/positives
  // on the training split.
  std::optional<double> class_weight;
  std::size_t jobs = 1;
  // Keep the best validation epoch (with early stopping) or the last epoch.
  bool keep_best = true;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw std::invalid_argument("learning_rate must be finite and nonnegative");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0))
      throw std::invalid_argument("Adam hyperparameters out of range");
    if (class_weight && !(*class_weight > 0.0)) throw std::invalid_argument("class_weight must be positive");
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"optimizer", c.optimizer == OptimizerKind::kAdam ? "adam" : "sgd"},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"epsilon", c.epsilon},
       {"patience", c.patience},
       {"seed", c.seed},
       {"class_weight", c.class_weight ? nlohmann::json(*c.class_weight) : nlohmann::json("auto")},
       {"jobs", c.jobs},
       {"checkpoint", c.keep_best ? "best" : "last"}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  const TrainConfig def;
  c.epochs = j.value("epochs", def.epochs);
  c.batch_size = j.value("batch_size", def.batch_size);
  c.learning_rate = j.value("learning_rate", def.learning_rate);
  const auto opt = j.value("optimizer", std::string("adam"));
  if (opt == "adam") c.optimizer = OptimizerKind::kAdam;
  else if (opt == "sgd") c.optimizer = OptimizerKind::kSgd;
  else throw std::invalid_argument("unknown optimizer '" + opt + "'");
  c.beta1 = j.value("beta1", def.beta1);
  c.beta2 = j.value("beta2", def.beta2);
  c.epsilon = j.value("epsilon", def.epsilon);
  c.patience = j.value("patience", def.patience);
  c.seed = j.value("seed", def.seed);
  c.class_weight.reset();
  if (j.contains("class_weight") && j.at("class_weight").is_number()) c.class_weight = j.at("class_weight").get<double>();
  c.jobs = j.value("jobs", def.jobs);
  const auto ckpt = j.value("checkpoint", std::string("best"));
  if (ckpt != "best" && ckpt != "last") throw std::invalid_argument("checkpoint must be 'best' or 'last'");
  c.keep_best = ckpt == "best";
  c.validate();
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

// Target tensor matching the head output: [B, 1] positive-class flags for
// binary tasks, [B, C] one-hot buckets for LOS, [B, 25] flags for phenotypes.
inline Tensor loss_targets(Task task, std::span<const SampleLabel> labels, std::size_t n_classes) {
  const std::size_t b = labels.size();
  switch (task) {
    case Task::kLos: {
      Tensor y({b, n_classes}, 0.0);
      for (std::size_t i = 0; i < b; ++i) y.at(i, static_cast<std::size_t>(labels[i].y)) = 1.0;
      return y;
    }
    case Task::kPhenotype: {
      Tensor y({b, n_classes}, 0.0);
      for (std::size_t i = 0; i < b; ++i) {
        if (labels[i].multi.size() != n_classes) throw std::invalid_argument("phenotype label width mismatch");
        for (std::size_t k = 0; k < n_classes; ++k) y.at(i, k) = labels[i].multi[k];
      }
      return y;
    }
    default: {
      Tensor y({b, 1}, 0.0);
      for (std::size_t i = 0; i < b; ++i) y.at(i, 0) = labels[i].y;
      return y;
    }
  }
}

// Weighted binary cross-entropy on the positive-class probability for IHM and
// decompensation, categorical cross-entropy for LOS, mean per-label binary
// cross-entropy for phenotypes.
inline Var task_loss(Var probs, const Tensor& targets, Task task, double pos_weight = 1.0) {
  switch (task) {
    case Task::kLos: return ad::categorical_cross_entropy(probs, targets);
    case Task::kPhenotype: return ad::binary_cross_entropy(probs, targets);
    default: {
      const std::size_t c = probs.shape().back();
      return ad::binary_cross_entropy(ad::slice(probs, -1, c - 1, c), targets, pos_weight);
    }
  }
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& c) : cfg_(c) {}

  void step(ParamStore& params, const Gradients& grads) {
    ++t_;
    const double lr = cfg_.learning_rate;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (const auto& [name, g] : grads) {
      auto p = params.mutable_data(name);
      const auto gv = g.data();
      if (gv.size() != p.size()) throw ShapeError("gradient size mismatch for " + name);
      if (cfg_.optimizer == OptimizerKind::kSgd) {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * gv[i];
        continue;
      }
      auto& m = m_[name];
      auto& v = v_[name];
      if (m.empty()) {
        m.assign(p.size(), 0.0);
        v.assign(p.size(), 0.0);
      }
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gv[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gv[i] * gv[i];
        p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.epsilon);
      }
    }
  }

  std::size_t steps() const noexcept { return t_; }

 private:
  TrainConfig cfg_;
  std::size_t t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct Split {
  std::vector<std::size_t> train, val, test;
};

// Patient-level split: no subject contributes samples to two parts.
inline Split split_by_patient(const PreparedDataset& ds, std::uint64_t seed, double test_fraction = 0.15,
                              double val_fraction = 0.15) {
  std::set<std::string, decltype(&id_less)> unique(&id_less);
  for (const auto& ep : ds.episodes) unique.insert(ep.subject_id);
  std::vector<std::string> subjects(unique.begin(), unique.end());
  std::mt19937_64 rng(seed);
  std::shuffle(subjects.begin(), subjects.end(), rng);
  const auto n = subjects.size();
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n - n_test)));
  std::map<std::string, int> part;
  for (std::size_t i = 0; i < n; ++i) part[subjects[i]] = i < n_test ? 2 : (i < n_test + n_val ? 1 : 0);
  Split s;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    switch (part[ds.subject_of(i)]) {
      case 0: s.train.push_back(i); break;
      case 1: s.val.push_back(i); break;
      default: s.test.push_back(i); break;
    }
  }
  return s;
}

inline void to_json(nlohmann::json& j, const Split& s) {
  j = {{"train", s.train}, {"val", s.val}, {"test", s.test}};
}

// Subject ids per part, so a split can be reapplied to a re-prepared dataset.
inline nlohmann::json split_subjects(const PreparedDataset& ds, const Split& s) {
  auto ids = [&](const std::vector<std::size_t>& idx) {
    std::set<std::string, decltype(&id_less)> out(&id_less);
    for (std::size_t i : idx) out.insert(ds.subject_of(i));
    return std::vector<std::string>(out.begin(), out.end());
  };
  return {{"train", ids(s.train)}, {"val", ids(s.val)}, {"test", ids(s.test)}};
}

// Samples whose subject is listed under `part` in a split_subjects() object.
inline std::vector<std::size_t> select_part(const PreparedDataset& ds, const nlohmann::json& subjects,
                                            const std::string& part) {
  if (!subjects.contains(part)) throw std::invalid_argument("split has no part named '" + part + "'");
  const auto list = subjects.at(part).get<std::vector<std::string>>();
  const std::set<std::string> wanted(list.begin(), list.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    if (wanted.count(ds.subject_of(i))) out.push_back(i);
  return out;
}

// negatives/positives over the given samples, 1 when either count is zero.
inline double balanced_pos_weight(const PreparedDataset& ds, std::span<const std::size_t> idx) {
  double pos = 0, neg = 0;
  for (std::size_t i : idx) (ds.samples.at(i).plan.label.y ? pos : neg) += 1;
  return pos > 0 && neg > 0 ? neg / pos : 1.0;
}

// ---------------------------------------------------------------------------
// Batch gradients
// ---------------------------------------------------------------------------

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kMicroBatch = 8;

struct BatchGradient {
  double loss = 0.0;
  Gradients grads;
};

namespace train_detail {
inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace train_detail

// Mean loss and gradient over `idx`. The batch is cut into fixed micro-batches
// that may run on separate threads; results are combined serially in order,
// so they do not depend on `jobs`.
inline BatchGradient batch_gradient(const TscanModel& model, const PreparedDataset& ds,
                                    std::span<const std::size_t> idx, double pos_weight, bool train,
                                    std::uint64_t dropout_seed, std::size_t jobs = 1) {
  if (idx.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  const auto& cfg = model.config();
  const std::size_t chunks = (idx.size() + kMicroBatch - 1) / kMicroBatch;
  std::vector<BatchGradient> parts(chunks);
  for_each_chunk(chunks, jobs, [&](std::size_t k) {
    const std::size_t lo = k * kMicroBatch, hi = std::min(idx.size(), lo + kMicroBatch);
    const auto sub = idx.subspan(lo, hi - lo);
    std::mt19937_64 rng(train_detail::mix(dropout_seed, k));
    Tape tape;
    auto out = model.forward(tape, stack_windows(ds, sub), train, &rng);
    for (double p : out.probs.value().data())
      if (!std::isfinite(p)) throw DivergenceError("non-finite prediction");
    const auto labels = labels_of(ds, sub);
    Var loss = task_loss(out.probs, loss_targets(cfg.task, labels, cfg.n_classes), cfg.task, pos_weight);
    tape.backward(loss);
    parts[k] = {loss.value().item(), tape.gradients()};
  });
  BatchGradient total;
  for (std::size_t k = 0; k < chunks; ++k) {
    const std::size_t lo = k * kMicroBatch, hi = std::min(idx.size(), lo + kMicroBatch);
    const double w = static_cast<double>(hi - lo) / static_cast<double>(idx.size());
    total.loss += w * parts[k].loss;
    for (auto& [name, g] : parts[k].grads) {
      Tensor scaled = kernels::scale(g, w);
      auto it = total.grads.find(name);
      if (it == total.grads.end()) total.grads.emplace(name, std::move(scaled));
      else kernels::add_into(it->second, scaled);
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;  // NaN when undefined on the validation split
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::string metric;
  bool minimize = false;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;

  // Equality of everything except wall-clock times.
  bool same_trajectory(const TrainLog& o) const {
    if (metric != o.metric || best_epoch != o.best_epoch || epochs.size() != o.epochs.size()) return false;
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      const auto &a = epochs[i], &b = o.epochs[i];
      const bool metric_eq = a.val_metric == b.val_metric || (std::isnan(a.val_metric) && std::isnan(b.val_metric));
      if (a.epoch != b.epoch || a.train_loss != b.train_loss || !metric_eq) return false;
    }
    return true;
  }

  double best_metric() const { return epochs.at(best_epoch).val_metric; }

  // Without wall times the file is a pure function of data, config and seed.
  void write_csv(const std::string& path, bool with_wall_time = true) const {
    csv::Writer w(path);
    std::vector<std::string> header{"epoch", "train_loss", "val_" + metric};
    if (with_wall_time) header.push_back("wall_seconds");
    header.push_back("best");
    w.row(header);
    for (const auto& e : epochs) {
      std::vector<std::string> row{std::to_string(e.epoch), csv::num(e.train_loss), csv::num(e.val_metric)};
      if (with_wall_time) row.push_back(csv::num(e.wall_seconds, 6));
      row.push_back(e.epoch == best_epoch ? "1" : "0");
      w.row(row);
    }
    w.close();
  }
};

struct TrainResult {
  TscanModel model;  // parameters of the best validation epoch
  TrainLog log;
  double pos_weight = 1.0;
};

inline void check_dataset_matches(const ModelConfig& mc, const PreparedDataset& ds) {
  if (mc.t != ds.t || mc.d != ds.width() || mc.task != ds.task) {
    throw std::invalid_argument("model config (t=" + std::to_string(mc.t) + ", d=" + std::to_string(mc.d) +
                                ", task=" + to_string(mc.task) + ") does not match dataset (t=" +
                                std::to_string(ds.t) + ", d=" + std::to_string(ds.width()) +
                                ", task=" + to_string(ds.task) + ")");
  }
}

// Both branches, the fused head and the loss are differentiated jointly each
// step. The returned model holds the parameters of the best validation epoch.
inline TrainResult train(const PreparedDataset& ds, const Split& split, const ModelConfig& mc, const TrainConfig& tc,
                         std::ostream* progress = nullptr) {
  tc.validate();
  mc.validate();
  check_dataset_matches(mc, ds);
  if (split.train.empty() || split.val.empty()) throw std::invalid_argument("train and validation splits must be nonempty");

  TscanModel model(mc, tc.seed);
  const bool binary = mc.task == Task::kIhm || mc.task == Task::kDecompensation;
  const double pos_weight = binary ? tc.class_weight.value_or(balanced_pos_weight(ds, split.train)) : 1.0;
  const auto vm = validation_metric(mc.task);
  const auto val_labels = labels_of(ds, split.val);

  TrainLog log{vm.name, vm.minimize, {}, 0, false};
  Optimizer opt(tc);
  std::mt19937_64 shuffle_rng(train_detail::mix(tc.seed, 0xda7a));
  std::optional<ParamStore> best;
  std::vector<std::size_t> order = split.train;

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0, lo = 0; lo < order.size(); ++b, lo += tc.batch_size) {
      const auto batch = std::span<const std::size_t>(order).subspan(lo, std::min(tc.batch_size, order.size() - lo));
      const std::string where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(b);
      BatchGradient g;
      try {
        g = batch_gradient(model, ds, batch, pos_weight, true, train_detail::mix(tc.seed, epoch * 1000003ull + b),
                           tc.jobs);
      } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + " at " + where);
      }
      if (!std::isfinite(g.loss)) throw DivergenceError("loss became " + std::to_string(g.loss) + " at " + where);
      loss_sum += g.loss * static_cast<double>(batch.size());
      opt.step(model.mutable_params(), g.grads);
    }

    const Tensor probs = predict_samples(model, ds, split.val, tc.jobs);
    const auto m = task_metrics(mc.task, probs, val_labels);
    const double metric = m.count(vm.name) ? m.at(vm.name) : std::nan("");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.epochs.push_back({epoch, loss_sum / static_cast<double>(order.size()), metric, secs});

    const bool improved = std::isfinite(metric) &&
                          (!best || (vm.minimize ? metric < log.best_metric() : metric > log.best_metric()));
    if (improved) {
      best = model.params();
      log.best_epoch = epoch;
    }
    if (progress) {
      *progress << "epoch " << epoch << " loss " << log.epochs.back().train_loss << " val_" << vm.name << ' '
                << metric << (improved ? " *" : "") << '\n';
    }
    if (tc.keep_best && epoch >= log.best_epoch + tc.patience && epoch + 1 < tc.epochs) {
      log.stopped_early = true;
      break;
    }
  }
  if (best && tc.keep_best) {
    model.set_params(std::move(*best));
  } else {
    log.best_epoch = log.epochs.size() - 1;
  }
  return {std::move(model), std::move(log), pos_weight};
}

}  // namespace tscan
