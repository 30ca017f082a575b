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
#include <random>
#include <sstream>
#include <vector>

#include "support/metric_oracles.hpp"
#include "tscan/metrics.hpp"

namespace tscan {
namespace {

using namespace metrics;
using testing::auc_pairs;

TEST(AucRoc, PerfectRankingAndAllTies) {
  EXPECT_DOUBLE_EQ(auc_roc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(auc_roc(std::vector<double>{0.5, 0.5, 0.5, 0.5, 0.5}, std::vector<int>{0, 1, 0, 1, 1}), 0.5);
}

TEST(AucRoc, SingleClassIsUndefined) {
  EXPECT_THROW(auc_roc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), MetricError);
  EXPECT_THROW(auc_pr(std::vector<double>{0.1, 0.2}, std::vector<int>{0, 0}), MetricError);
  EXPECT_THROW(auc_roc(std::vector<double>{0.1}, std::vector<int>{1, 0}), std::invalid_argument);
}

TEST(AucRoc, MatchesPairCountingOnRandomFixtures) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    auto f = testing::random_binary_fixture(rng, 50);
    EXPECT_NEAR(auc_roc(f.scores, f.labels), auc_pairs(f.scores, f.labels), 1e-12);
  }
}

TEST(AucRoc, InvariantUnderMonotoneTransformAndComplementsUnderNegation) {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 50; ++rep) {
    auto f = testing::random_binary_fixture(rng);
    std::vector<double> warped, negated;
    for (double s : f.scores) {
      warped.push_back(std::exp(3 * s) - 7);
      negated.push_back(-s);
    }
    const double a = auc_roc(f.scores, f.labels);
    EXPECT_NEAR(auc_roc(warped, f.labels), a, 1e-12);
    EXPECT_NEAR(a + auc_roc(negated, f.labels), 1.0, 1e-12);
  }
}

TEST(AucPr, PerfectAndWorstSinglePositive) {
  EXPECT_DOUBLE_EQ(auc_pr(std::vector<double>{0.9, 0.8, 0.1}, std::vector<int>{1, 1, 0}), 1.0);
  const std::vector<double> s{0.9, 0.8, 0.7, 0.6, 0.1};
  EXPECT_NEAR(auc_pr(s, std::vector<int>{0, 0, 0, 0, 1}), 1.0 / 5.0, 1e-15);
}

TEST(AucPr, MatchesExhaustiveThresholdSweep) {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 200; ++rep) {
    auto f = testing::random_binary_fixture(rng, 50);
    EXPECT_NEAR(auc_pr(f.scores, f.labels), testing::ap_threshold_sweep(f.scores, f.labels), 1e-12);
  }
}

TEST(KappaLinear, IdenticalIndependentAndHandComputed) {
  const std::vector<int> a{0, 3, 5, 9, 2, 2, 7};
  EXPECT_DOUBLE_EQ(kappa_linear(a, a), 1.0);

  // Every (pred, truth) pair appears once, so observed equals expected.
  std::vector<int> p, t;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      p.push_back(i);
      t.push_back(j);
    }
  EXPECT_NEAR(kappa_linear(p, t, 3), 0.0, 1e-15);

  // Weighted disagreement 2 against expected 8/3.
  EXPECT_NEAR(kappa_linear(std::vector<int>{0, 0, 1, 1, 2, 2}, std::vector<int>{0, 1, 1, 2, 2, 0}, 3), 0.25, 1e-15);
}

TEST(KappaLinear, SymmetricAndMatchesConfusionOracle) {
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<int> bucket(0, 9);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<int> a(40), b(40);
    for (auto& v : a) v = bucket(rng);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = rng() % 3 == 0 ? bucket(rng) : a[i];
    const double k = kappa_linear(a, b);
    EXPECT_NEAR(k, kappa_linear(b, a), 1e-12);
    EXPECT_NEAR(k, testing::kappa_confusion(a, b, 10), 1e-12);
    EXPECT_GE(k, -1.0);
    EXPECT_LE(k, 1.0);
  }
}

TEST(KappaLinear, RejectsBadInput) {
  EXPECT_THROW(kappa_linear(std::vector<int>{}, std::vector<int>{}), std::invalid_argument);
  EXPECT_THROW(kappa_linear(std::vector<int>{10}, std::vector<int>{0}), std::invalid_argument);
}

TEST(LosBuckets, PartitionIsTotalAndRightOpen) {
  EXPECT_EQ(los_bucket(12), 0);
  EXPECT_EQ(los_bucket(0), 0);
  EXPECT_EQ(los_bucket(23.999), 0);
  EXPECT_EQ(los_bucket(24), 1);
  EXPECT_EQ(los_bucket(167.9), 6);
  EXPECT_EQ(los_bucket(168), 7);
  EXPECT_EQ(los_bucket(191.9), 7);
  EXPECT_EQ(los_bucket(192), 8);
  EXPECT_EQ(los_bucket(240), 8);  // ten days
  EXPECT_EQ(los_bucket(335.9), 8);
  EXPECT_EQ(los_bucket(336), 9);
  EXPECT_EQ(los_bucket(1e6), 9);
  EXPECT_THROW(los_bucket(-1), std::invalid_argument);
  int prev = 0;
  for (double h = 0; h < 800; h += 0.25) {
    const int b = los_bucket(h);
    EXPECT_TRUE(b == prev || b == prev + 1);
    prev = b;
  }
  EXPECT_EQ(prev, 9);
}

TEST(Mad, RepresentativesAndArithmetic) {
  std::vector<int> buckets;
  std::vector<double> hours;
  for (int b = 0; b < 10; ++b) {
    buckets.push_back(b);
    hours.push_back(bucket_representative_hours(b));
  }
  EXPECT_DOUBLE_EQ(mad_hours(buckets, hours), 0.0);
  EXPECT_DOUBLE_EQ(mad_hours(std::vector<int>{0}, std::vector<double>{36}), 24.0);
  EXPECT_DOUBLE_EQ(mad_hours(std::vector<int>{0, 0, 9}, std::vector<double>{12, 20, 0}), 8.0);
  EXPECT_THROW(mad_hours(std::vector<int>{}, std::vector<double>{}), std::invalid_argument);
}

TEST(MultiLabel, PerfectAndHalfTied) {
  // Two columns, row-major.
  const std::vector<double> s{0.9, 0.9, 0.1, 0.1, 0.8, 0.8, 0.2, 0.2};
  const std::vector<int> y{1, 1, 0, 0, 1, 1, 0, 0};
  auto r = macro_micro_auc(s, y, 2);
  EXPECT_DOUBLE_EQ(r.macro, 1.0);
  EXPECT_DOUBLE_EQ(r.micro, 1.0);

  const std::vector<double> s2{0.9, 0.5, 0.1, 0.5, 0.8, 0.5, 0.2, 0.5};
  const std::vector<int> y2{1, 1, 0, 0, 1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(macro_micro_auc(s2, y2, 2).macro, 0.75);
}

TEST(MultiLabel, SkipsSingleClassColumnsAndFailsWhenAllAre) {
  const std::vector<double> s{0.9, 0.3, 0.1, 0.4};
  const std::vector<int> y{1, 1, 0, 1};
  auto r = macro_micro_auc(s, y, 2);
  EXPECT_EQ(r.skipped_labels, std::vector<std::size_t>{1});
  EXPECT_DOUBLE_EQ(r.macro, 1.0);
  EXPECT_THROW(macro_micro_auc(s, std::vector<int>{1, 1, 1, 1}, 2), MetricError);
}

TEST(MultiLabel, SkippedColumnsAreReportedToTheWarningStream) {
  std::ostringstream sink;
  std::ostream* saved = warning_stream();
  warning_stream() = &sink;
  macro_micro_auc(std::vector<double>{0.9, 0.3, 0.1, 0.4}, std::vector<int>{1, 1, 0, 1}, 2);
  warning_stream() = saved;
  EXPECT_NE(sink.str().find("skipped 1"), std::string::npos) << sink.str();
}

TEST(MultiLabel, MatchesPairCountingOn25Labels) {
  std::mt19937_64 rng(15);
  std::uniform_int_distribution<int> grid(0, 10);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t rows = 5, cols = 25;
    std::vector<double> s(rows * cols);
    std::vector<int> y(rows * cols);
    for (auto& v : s) v = grid(rng) / 10.0;
    for (auto& v : y) v = static_cast<int>(rng() % 2);
    double macro = 0;
    std::size_t used = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      std::vector<double> cs;
      std::vector<int> cy;
      for (std::size_t r = 0; r < rows; ++r) {
        cs.push_back(s[r * cols + c]);
        cy.push_back(y[r * cols + c]);
      }
      const int pos = std::count(cy.begin(), cy.end(), 1);
      if (pos == 0 || pos == static_cast<int>(rows)) continue;
      macro += auc_pairs(cs, cy);
      ++used;
    }
    auto r = macro_micro_auc(s, y, cols);
    EXPECT_NEAR(r.macro, macro / used, 1e-12);
    EXPECT_NEAR(r.micro, auc_pairs(s, y), 1e-12);
  }
}

TEST(Bootstrap, IntervalContainsPointEstimate) {
  std::mt19937_64 rng(16);
  for (int rep = 0; rep < 10; ++rep) {
    auto f = testing::random_binary_fixture(rng, 60);
    const double point = auc_roc(f.scores, f.labels);
    auto ci = bootstrap_ci(
        f.scores.size(),
        [&](std::span<const std::size_t> idx) {
          std::vector<double> s;
          std::vector<int> y;
          for (auto i : idx) {
            s.push_back(f.scores[i]);
            y.push_back(f.labels[i]);
          }
          return auc_roc(s, y);
        },
        point, 200, rep);
    ASSERT_TRUE(ci.has_value());
    EXPECT_LE(ci->lo, point);
    EXPECT_GE(ci->hi, point);
    EXPECT_GE(ci->lo, 0.0);
    EXPECT_LE(ci->hi, 1.0);
  }
}

TEST(EvalResultTest, JsonRoundTrip) {
  EvalResult r;
  r.values = {{"auc_roc", 0.75}, {"auc_pr", 0.5}};
  r.sample_count = 12;
  r.intervals["auc_roc"] = {0.6, 0.9};
  r.metadata["auc_pr"] = "average precision";
  nlohmann::json j = r;
  const auto back = j.get<EvalResult>();
  EXPECT_EQ(back.values, r.values);
  EXPECT_EQ(back.sample_count, 12u);
  EXPECT_DOUBLE_EQ(back.intervals.at("auc_roc").hi, 0.9);
  EXPECT_EQ(back.metadata, r.metadata);
}

}  // namespace
}  // namespace tscan
