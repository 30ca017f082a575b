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

// Brute-force metric definitions, written independently of the library code.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace tscan::testing {

// Mann-Whitney pair counting.
inline double auc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0;
  double pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

// Every distinct score is tried as a threshold, counting from scratch.
inline double ap_threshold_sweep(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<double> thresholds(s);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double positives = 0;
  for (int v : y) positives += v;
  double ap = 0, prev_recall = 0;
  for (double th : thresholds) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= th) (y[i] ? tp : fp) += 1;
    }
    const double recall = tp / positives;
    ap += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
  }
  return ap;
}

inline double kappa_confusion(const std::vector<int>& a, const std::vector<int>& b, int k) {
  std::vector<std::vector<double>> o(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) o[a[i]][b[i]] += 1;
  const double n = static_cast<double>(a.size());
  double num = 0, den = 0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      double row = 0, col = 0;
      for (int m = 0; m < k; ++m) {
        row += o[i][m];
        col += o[m][j];
      }
      const double w = std::abs(i - j) / static_cast<double>(k - 1);
      num += w * o[i][j];
      den += w * row * col / n;
    }
  }
  return 1.0 - num / den;
}

struct BinaryFixture {
  std::vector<double> scores;
  std::vector<int> labels;
};

// Random scores on a coarse grid so ties are common; both classes present.
inline BinaryFixture random_binary_fixture(std::mt19937_64& rng, std::size_t max_n = 100) {
  std::uniform_int_distribution<std::size_t> size(2, max_n);
  std::uniform_int_distribution<int> grid(0, 20);
  std::bernoulli_distribution coin(0.4);
  BinaryFixture f;
  const std::size_t n = size(rng);
  for (std::size_t i = 0; i < n; ++i) {
    f.scores.push_back(grid(rng) / 20.0);
    f.labels.push_back(coin(rng) ? 1 : 0);
  }
  f.labels[0] = 1;
  f.labels[1] = 0;
  return f;
}

}  // namespace tscan::testing
