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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "support/oracles.hpp"
#include "support/scratch.hpp"
#include "tscan/baseline.hpp"
#include "tscan/synth.hpp"
#include "tscan/train.hpp"

namespace tscan {
namespace {

PreparedDataset small_ihm(std::size_t patients = 16, std::uint64_t seed = 4) {
  const auto dict = default_dictionary();
  const auto c = synth_cohort(seed, patients, dict);
  return prepare_dataset(c.stays, c.events, c.phenotypes, dict, Task::kIhm, 48, 1);
}

ModelConfig small_model(const PreparedDataset& ds, Fusion fusion = Fusion::kMaxPool) {
  ModelConfig c;
  c.t = ds.t;
  c.d = ds.width();
  c.n = 4;
  c.layer = LayerConfig{8, 2, 16, 0.1};
  c.fusion = fusion;
  c.task = ds.task;
  c.n_classes = default_classes(ds.task);
  return c;
}

TrainConfig quick(std::size_t epochs = 2) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 4;
  t.learning_rate = 1e-2;
  t.seed = 3;
  return t;
}

// --- losses ------------------------------------------------------------------

TEST(TaskLoss, PerfectPredictionIsNearZero) {
  Tape tape;
  const std::vector<SampleLabel> binary{{1, {}, 0}, {0, {}, 0}};
  auto p = tape.constant(Tensor::matrix({{0, 1}, {1, 0}}));
  EXPECT_LE(task_loss(p, loss_targets(Task::kIhm, binary, 2), Task::kIhm).value().item(), 1e-6);

  Tensor onehot({2, 10}, 0.0);
  onehot.at(0, 3) = 1;
  onehot.at(1, 9) = 1;
  const std::vector<SampleLabel> buckets{{3, {}, 80}, {9, {}, 500}};
  EXPECT_LE(task_loss(tape.constant(onehot), loss_targets(Task::kLos, buckets, 10), Task::kLos).value().item(), 1e-6);
}

TEST(TaskLoss, UniformBinaryPredictionIsLn2) {
  Tape tape;
  const std::vector<SampleLabel> labels{{1, {}, 0}, {0, {}, 0}, {1, {}, 0}};
  auto p = tape.constant(Tensor({3, 2}, 0.5));
  EXPECT_NEAR(task_loss(p, loss_targets(Task::kDecompensation, labels, 2), Task::kDecompensation).value().item(),
              std::log(2.0), 1e-15);
  std::vector<SampleLabel> multi{{0, std::vector<int>(25, 0), 0}};
  multi[0].multi[4] = 1;
  auto q = tape.constant(Tensor({1, 25}, 0.5));
  EXPECT_NEAR(task_loss(q, loss_targets(Task::kPhenotype, multi, 25), Task::kPhenotype).value().item(), std::log(2.0),
              1e-15);
}

TEST(TaskLoss, GradientThroughSoftmaxMatchesFiniteDifferences) {
  // Logits chosen so that softmax gives p1 = 0.8.
  const double l1 = std::log(4.0);
  const Tensor logits = Tensor::matrix({{0.0, l1}});
  const std::vector<SampleLabel> y{{1, {}, 0}};
  const Tensor target = loss_targets(Task::kIhm, y, 2);
  auto loss_of = [&](Tape&, const std::vector<Var>& in) {
    return task_loss(ad::softmax(in[0], -1), target, Task::kIhm);
  };

  Tape tape;
  auto x = tape.leaf(logits);
  auto probs = ad::softmax(x, -1);
  EXPECT_NEAR(probs.value().at(0, 1), 0.8, 1e-15);
  auto loss = task_loss(probs, target, Task::kIhm);
  tape.backward(loss);
  EXPECT_NEAR(tape.grad(probs).at(0, 1), -1.0 / 0.8, 1e-12);
  // d/dz1 of -log softmax_1 = p1 - 1.
  EXPECT_NEAR(tape.grad(x).at(0, 1), 0.8 - 1.0, 1e-12);
  const auto report = testing::check_input_gradients(loss_of, {logits});
  EXPECT_LT(report.max_rel_error, 1e-7);
}

TEST(TaskLoss, PositiveWeightScalesPositiveTerms) {
  Tape tape;
  const std::vector<SampleLabel> y{{1, {}, 0}, {0, {}, 0}};
  auto p = tape.constant(Tensor::matrix({{0.4, 0.6}, {0.7, 0.3}}));
  const double w = 3.0;
  const double expect = -(w * std::log(0.6) + std::log(0.7)) / 2.0;
  EXPECT_NEAR(task_loss(p, loss_targets(Task::kIhm, y, 2), Task::kIhm, w).value().item(), expect, 1e-14);
}

TEST(TaskLoss, OutOfRangeProbabilitySignalsHeadBug) {
  Tape tape;
  const std::vector<SampleLabel> y{{1, {}, 0}};
  auto p = tape.constant(Tensor::matrix({{-0.5, 1.5}}));
  EXPECT_THROW(task_loss(p, loss_targets(Task::kIhm, y, 2), Task::kIhm), std::domain_error);
}

// --- optimizers --------------------------------------------------------------

double bowl(const ParamStore& s) {
  double l = 0;
  const auto& w = s.value("w");
  for (std::size_t i = 0; i < w.size(); ++i) l += (i + 1.0) * std::pow(w[i] - 0.5 * i, 2);
  return l;
}

Gradients bowl_grad(const ParamStore& s) {
  const auto& w = s.value("w");
  Tensor g(w.shape());
  for (std::size_t i = 0; i < w.size(); ++i) g[i] = 2 * (i + 1.0) * (w[i] - 0.5 * i);
  return {{"w", g}};
}

TEST(OptimizerTest, AdamStepDescendsQuadraticBowl) {
  for (double lr : {1e-2, 1e-3, 1e-4}) {
    ParamStore s;
    s.add("w", Tensor::vector({3.0, -2.0, 1.0, 4.0}));
    TrainConfig c;
    c.learning_rate = lr;
    Optimizer opt(c);
    double prev = bowl(s);
    for (int step = 0; step < 20; ++step) {
      opt.step(s, bowl_grad(s));
      const double now = bowl(s);
      EXPECT_LT(now, prev) << "lr " << lr << " step " << step;
      prev = now;
    }
  }
  ParamStore s;
  s.add("w", Tensor::vector({3.0, -2.0, 1.0, 4.0}));
  TrainConfig c;
  c.learning_rate = 0.05;
  Optimizer opt(c);
  for (int step = 0; step < 3000; ++step) opt.step(s, bowl_grad(s));
  EXPECT_LT(bowl(s), 1e-6);
}

TEST(OptimizerTest, SgdStepIsPlainGradientDescent) {
  ParamStore s;
  s.add("w", Tensor::vector({1.0, 2.0}));
  TrainConfig c;
  c.optimizer = OptimizerKind::kSgd;
  c.learning_rate = 0.1;
  Optimizer opt(c);
  opt.step(s, {{"w", Tensor::vector({10.0, -5.0})}});
  EXPECT_DOUBLE_EQ(s.value("w")[0], 0.0);
  EXPECT_DOUBLE_EQ(s.value("w")[1], 2.5);
}

TEST(TrainConfigTest, ValidatesAndRoundTrips) {
  TrainConfig c;
  c.class_weight = 2.5;
  c.optimizer = OptimizerKind::kSgd;
  c.keep_best = false;
  const auto back = nlohmann::json(c).get<TrainConfig>();
  EXPECT_EQ(nlohmann::json(back), nlohmann::json(c));
  EXPECT_FALSE(nlohmann::json(TrainConfig{}).get<TrainConfig>().class_weight.has_value());
  c.epochs = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.learning_rate = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

// --- splits and batches ------------------------------------------------------

TEST(SplitTest, PatientLevelAndDeterministic) {
  const auto ds = small_ihm(60);
  const auto s = split_by_patient(ds, 1);
  std::set<std::string> tr, va, te;
  for (auto i : s.train) tr.insert(ds.subject_of(i));
  for (auto i : s.val) va.insert(ds.subject_of(i));
  for (auto i : s.test) te.insert(ds.subject_of(i));
  for (const auto& x : te) {
    EXPECT_FALSE(tr.count(x));
    EXPECT_FALSE(va.count(x));
  }
  for (const auto& x : va) EXPECT_FALSE(tr.count(x));
  EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), ds.samples.size());
  const double n = static_cast<double>(ds.episodes.size());
  EXPECT_NEAR(static_cast<double>(te.size()), 0.15 * n, 1.0);
  EXPECT_EQ(nlohmann::json(split_by_patient(ds, 1)), nlohmann::json(s));
}

TEST(BatchGradientTest, EqualsMeanOfPerSampleGradients) {
  const auto ds = small_ihm(14);
  const TscanModel model(small_model(ds), 5);
  std::vector<std::size_t> idx(std::min<std::size_t>(ds.samples.size(), 11));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto batch = batch_gradient(model, ds, idx, 2.0, false, 0);
  Gradients mean;
  double loss = 0;
  for (std::size_t i : idx) {
    const std::size_t one[] = {i};
    auto g = batch_gradient(model, ds, one, 2.0, false, 0);
    loss += g.loss / idx.size();
    for (auto& [k, v] : g.grads) {
      auto scaled = kernels::scale(v, 1.0 / idx.size());
      if (!mean.count(k)) mean.emplace(k, scaled);
      else kernels::add_into(mean.at(k), scaled);
    }
  }
  EXPECT_NEAR(batch.loss, loss, 1e-10);
  ASSERT_EQ(batch.grads.size(), mean.size());
  for (const auto& [k, v] : batch.grads) {
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(v[i], mean.at(k)[i], 1e-10) << k;
  }
}

TEST(BatchGradientTest, IndependentOfWorkerCount) {
  const auto ds = small_ihm(14);
  const TscanModel model(small_model(ds), 5);
  std::vector<std::size_t> idx(std::min<std::size_t>(ds.samples.size(), 20));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto a = batch_gradient(model, ds, idx, 1.0, true, 77, 1);
  const auto b = batch_gradient(model, ds, idx, 1.0, true, 77, 3);
  EXPECT_EQ(a.loss, b.loss);
  for (const auto& [k, v] : a.grads) EXPECT_EQ(v, b.grads.at(k)) << k;
}

// --- training loop -----------------------------------------------------------

TEST(TrainLoop, ZeroLearningRateLeavesParametersUnchanged) {
  const auto ds = small_ihm();
  const auto split = split_by_patient(ds, 2);
  const auto mc = small_model(ds);
  auto tc = quick(1);
  tc.learning_rate = 0.0;
  const auto r = train(ds, split, mc, tc);
  EXPECT_TRUE(r.model.params() == TscanModel(mc, tc.seed).params());
}

TEST(TrainLoop, SameSeedGivesIdenticalLogAndParameters) {
  const auto ds = small_ihm();
  const auto split = split_by_patient(ds, 2);
  const auto mc = small_model(ds, Fusion::kConcatenate);
  const auto a = train(ds, split, mc, quick(3));
  auto tc = quick(3);
  tc.jobs = 2;
  const auto b = train(ds, split, mc, tc);
  EXPECT_TRUE(a.log.same_trajectory(b.log));
  EXPECT_TRUE(a.model.params() == b.model.params());
  auto other = quick(3);
  other.seed = 99;
  EXPECT_FALSE(train(ds, split, mc, other).log.same_trajectory(a.log));
}

TEST(TrainLoop, BestEpochAndEarlyStoppingBound) {
  const auto ds = small_ihm(20);
  const auto split = split_by_patient(ds, 2);
  auto tc = quick(12);
  tc.patience = 2;
  tc.learning_rate = 5e-2;
  const auto r = train(ds, split, small_model(ds), tc);
  const auto& log = r.log;
  ASSERT_FALSE(log.epochs.empty());
  EXPECT_LE(log.epochs.size() - 1, log.best_epoch + tc.patience);
  double best = -INFINITY;
  for (const auto& e : log.epochs)
    if (std::isfinite(e.val_metric)) best = std::max(best, e.val_metric);
  if (std::isfinite(best)) {
    EXPECT_EQ(log.best_metric(), best);
  }
  // The returned parameters reproduce the best epoch's validation metric.
  const auto m = task_metrics(Task::kIhm, predict_samples(r.model, ds, split.val), labels_of(ds, split.val));
  if (m.count("auc_roc")) {
    EXPECT_EQ(m.at("auc_roc"), log.best_metric());
  }
}

TEST(TrainLoop, LastCheckpointRunsAllEpochs) {
  const auto ds = small_ihm(20);
  const auto split = split_by_patient(ds, 2);
  auto tc = quick(6);
  tc.patience = 1;
  tc.keep_best = false;
  const auto r = train(ds, split, small_model(ds), tc);
  ASSERT_EQ(r.log.epochs.size(), 6u);
  EXPECT_EQ(r.log.best_epoch, 5u);
  EXPECT_FALSE(r.log.stopped_early);
  const auto m = task_metrics(Task::kIhm, predict_samples(r.model, ds, split.val), labels_of(ds, split.val));
  if (m.count("auc_roc")) {
    EXPECT_EQ(m.at("auc_roc"), r.log.epochs.back().val_metric);
  }
}

TEST(TrainLoop, DivergenceIsReportedWithBatchIndex) {
  const auto ds = small_ihm();
  const auto split = split_by_patient(ds, 2);
  auto tc = quick(1);
  tc.learning_rate = 1e300;
  tc.optimizer = OptimizerKind::kSgd;
  try {
    train(ds, split, small_model(ds), tc);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("batch"), std::string::npos) << e.what();
  }
}

TEST(TrainLoop, RejectsMismatchedModelConfig) {
  const auto ds = small_ihm();
  auto mc = small_model(ds);
  mc.d += 1;
  EXPECT_THROW(train(ds, split_by_patient(ds, 2), mc, quick(1)), std::invalid_argument);
}

TEST(TrainLogTest, CsvHasOneRowPerEpoch) {
  TrainLog log{"auc_roc", false, {{0, 0.7, 0.6, 1.0}, {1, 0.5, 0.8, 1.0}}, 1, false};
  testing::ScratchDir dir("log");
  log.write_csv((dir / "log.csv").string());
  const auto table = csv::Table::read((dir / "log.csv").string());
  EXPECT_EQ(table.header(), (std::vector<std::string>{"epoch", "train_loss", "val_auc_roc", "wall_seconds", "best"}));
  ASSERT_EQ(table.rows().size(), 2u);
  EXPECT_EQ(table.rows()[1][4], "1");
}

// --- logistic baseline -------------------------------------------------------

TEST(Logistic, SeparableToySetIsFitExactly) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0, 1);
  Tensor x({60, 2});
  Tensor y({60, 1});
  for (std::size_t i = 0; i < 60; ++i) {
    const double a = n(rng), b = n(rng);
    x.at(i, 0) = a;
    x.at(i, 1) = b;
    y.at(i, 0) = a + 2 * b > 0.3 ? 1 : 0;
    if (std::abs(a + 2 * b - 0.3) < 0.2) x.at(i, 0) += y.at(i, 0) ? 0.5 : -0.5;  // keep a margin
  }
  LogisticConfig cfg;
  cfg.l2 = 0;
  cfg.iterations = 3000;
  const auto m = fit_logistic(x, y, cfg);
  const auto p = m.predict(x);
  for (std::size_t i = 0; i < 60; ++i) EXPECT_EQ(p.at(i, 0) > 0.5, y.at(i, 0) == 1.0) << i;
}

TEST(Logistic, SingleClassPredictsThePrior) {
  std::mt19937_64 rng(9);
  Tensor x = testing::random_tensor({30, 3}, rng);
  for (double label : {0.0, 1.0}) {
    const auto m = fit_logistic(x, Tensor({30, 1}, label));
    const Tensor p = m.predict(x);
    for (double v : p.data()) EXPECT_NEAR(v, label, 2e-3);
  }
}

TEST(Logistic, SummaryFeaturesSkipPadding) {
  Tensor w({4, 1}, 0.0);
  w.at(2, 0) = 3;
  w.at(3, 0) = 5;
  EXPECT_EQ(summary_features(w, 2), (std::vector<double>{4, 3, 5, 5}));
  EXPECT_EQ(summary_features(w, 4), (std::vector<double>{2, 0, 5, 5}));
}

TEST(Logistic, BaselineLearnsThePlantedSignal) {
  const auto ds = small_ihm(120, 6);
  const auto split = split_by_patient(ds, 1);
  const auto r = logistic_baseline(ds, split.train, split.test);
  EXPECT_GT(r.train.values.at("auc_roc"), 0.9);
  EXPECT_EQ(r.eval.sample_count, split.test.size());
}

}  // namespace
}  // namespace tscan
