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

#include <numeric>
#include <random>

#include "support/oracles.hpp"
#include "support/scratch.hpp"
#include "tscan/explain.hpp"

namespace tscan {
namespace {

ModelConfig ihm_toy(std::size_t d = 49, Fusion fusion = Fusion::kMaxPool) {
  ModelConfig c;
  c.t = 48;
  c.d = d;
  c.n = 4;
  c.layer = LayerConfig{8, 2, 16, 0.1};
  c.fusion = fusion;
  return c;
}

double total(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

TEST(AttentionReportTest, ShapesAndNormalization) {
  const TscanModel model(ihm_toy(), 3);
  std::mt19937_64 rng(4);
  const auto r = attention_report(model, testing::random_tensor({5, 48, 49}, rng));
  ASSERT_EQ(r.temporal.size(), 4u);
  for (const auto& v : r.temporal) {
    ASSERT_EQ(v.size(), 12u);
    EXPECT_NEAR(total(v), 1.0, 1e-12);
    for (double w : v) EXPECT_GE(w, 0.0);
  }
  ASSERT_EQ(r.indicator.size(), 49u);
  EXPECT_NEAR(total(r.indicator), 1.0, 1e-12);
  EXPECT_EQ(r.sample_count, 5u);
  EXPECT_TRUE(r.metadata.contains("aggregation"));
}

TEST(AttentionReportTest, MatchesDirectAggregationOfOneBlock) {
  const TscanModel model(ihm_toy(), 5);
  std::mt19937_64 rng(6);
  const Tensor x = testing::random_tensor({3, 48, 49}, rng);
  const auto r = attention_report(model, x, 2);  // batches of 2 and 1
  Tape tape;
  const auto out = model.forward(tape, x);
  const Tensor& p = out.temporal->self_attention[2].probs;  // [B, H, 12, 12]
  std::vector<double> expect(12, 0.0);
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t h = 0; h < 2; ++h)
      for (std::size_t q = 0; q < 12; ++q)
        for (std::size_t k = 0; k < 12; ++k) expect[k] += p[((b * 2 + h) * 12 + q) * 12 + k] / (3 * 2 * 12);
  for (std::size_t k = 0; k < 12; ++k) EXPECT_NEAR(r.temporal[2][k], expect[k], 1e-12);
}

TEST(AttentionReportTest, ZeroProjectionsGiveUniformWeights) {
  TscanModel model(ihm_toy(), 7);
  ParamStore p = model.params();
  for (const auto& name : p.names()) {
    const bool qk = name.ends_with("msa.wq") || name.ends_with("msa.wk");
    if (qk) p.set(name, Tensor(p.value(name).shape(), 0.0));
  }
  model.set_params(p);
  std::mt19937_64 rng(8);
  const auto r = attention_report(model, testing::random_tensor({4, 48, 49}, rng));
  for (const auto& v : r.temporal)
    for (double w : v) EXPECT_NEAR(w, 1.0 / 12, 1e-6);
  for (double w : r.indicator) EXPECT_NEAR(w, 1.0 / 49, 1e-6);
}

TEST(AttentionReportTest, SingleBranchModelsReportOnlyTheirBranch) {
  std::mt19937_64 rng(9);
  const Tensor x = testing::random_tensor({2, 48, 6}, rng);
  const auto t = attention_report(TscanModel(ihm_toy(6, Fusion::kTemporalOnly), 1), x);
  EXPECT_EQ(t.temporal.size(), 4u);
  EXPECT_TRUE(t.indicator.empty());
  const auto s = attention_report(TscanModel(ihm_toy(6, Fusion::kSpatialOnly), 1), x);
  EXPECT_TRUE(s.temporal.empty());
  EXPECT_EQ(s.indicator.size(), 6u);
}

TEST(AttentionReportTest, WideDictionaryGroupsTo155Variables) {
  const auto dict = wide_placeholder_dictionary();
  ModelConfig c = ihm_toy(dict.width());
  const TscanModel model(c, 2);
  std::mt19937_64 rng(10);
  const auto r = attention_report(model, testing::random_tensor({1, 48, dict.width()}, rng));
  EXPECT_EQ(r.indicator.size(), 180u);
  const auto grouped = r.per_variable(dict);
  EXPECT_EQ(grouped.size(), 155u);
  EXPECT_NEAR(total(grouped), 1.0, 1e-12);
}

TEST(AttentionReportTest, WritesCsvAndJson) {
  const auto dict = default_dictionary();
  const TscanModel model(ihm_toy(), 3);
  std::mt19937_64 rng(11);
  const auto r = attention_report(model, testing::random_tensor({2, 48, 49}, rng));
  testing::ScratchDir dir("explain");
  r.write(dir.path(), dict);
  for (int j = 0; j < 4; ++j) {
    const auto t = csv::Table::read((dir / ("temporal_chunk_" + std::to_string(j) + ".csv")).string());
    ASSERT_EQ(t.rows().size(), 12u);
    EXPECT_EQ(t.rows()[0][0], std::to_string(12 * j));
  }
  EXPECT_EQ(csv::Table::read((dir / "indicators.csv").string()).rows().size(), 49u);
  EXPECT_EQ(csv::Table::read((dir / "variables.csv").string()).rows().size(), 24u);
  std::ifstream in(dir / "report.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j.at("temporal_weights").size(), 4u);
}

TEST(AttentionReportTest, RejectsEmptySampleSet) {
  const TscanModel model(ihm_toy(), 3);
  PreparedDataset ds;
  EXPECT_THROW(attention_report(model, ds, std::vector<std::size_t>{}), std::invalid_argument);
}

}  // namespace
}  // namespace tscan
