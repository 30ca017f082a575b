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

// L2-regularized logistic regression on window summary statistics.

#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "tscan/episode.hpp"
#include "tscan/evaluate.hpp"

namespace tscan {

struct LogisticConfig {
  double learning_rate = 0.5;
  double l2 = 1e-3;
  std::size_t iterations = 500;
};

// One independent binary model per output column.
struct LogisticModel {
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  std::vector<std::vector<double>> weights;  // [outputs][features]
  std::vector<double> bias;                  // [outputs]

  std::size_t features() const { return feature_mean.size(); }
  std::size_t outputs() const { return bias.size(); }

  // Probabilities [N, outputs] for raw (unstandardized) features [N, F].
  Tensor predict(const Tensor& x) const {
    if (x.rank() != 2 || x.dim(1) != features()) throw ShapeError("logistic: feature width mismatch");
    Tensor out({x.dim(0), outputs()}, 0.0);
    for (std::size_t i = 0; i < x.dim(0); ++i) {
      for (std::size_t k = 0; k < outputs(); ++k) {
        double z = bias[k];
        for (std::size_t f = 0; f < features(); ++f)
          z += weights[k][f] * (x.at(i, f) - feature_mean[f]) / feature_std[f];
        out.at(i, k) = 1.0 / (1.0 + std::exp(-z));
      }
    }
    return out;
  }
};

// Full-batch gradient descent on the mean log loss plus (l2/2)|w|^2. The
// bias starts at the logit of the class prior and is not penalized.
inline LogisticModel fit_logistic(const Tensor& x, const Tensor& y, const LogisticConfig& cfg = {}) {
  if (x.rank() != 2 || y.rank() != 2 || x.dim(0) != y.dim(0)) throw ShapeError("logistic: expected X [N,F], Y [N,K]");
  const std::size_t n = x.dim(0), nf = x.dim(1), nk = y.dim(1);
  LogisticModel m;
  m.feature_mean.assign(nf, 0.0);
  m.feature_std.assign(nf, 0.0);
  for (std::size_t f = 0; f < nf; ++f) {
    for (std::size_t i = 0; i < n; ++i) m.feature_mean[f] += x.at(i, f);
    m.feature_mean[f] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) m.feature_std[f] += std::pow(x.at(i, f) - m.feature_mean[f], 2);
    m.feature_std[f] = std::sqrt(m.feature_std[f] / static_cast<double>(n));
    if (m.feature_std[f] < 1e-12) m.feature_std[f] = 1.0;
  }
  Tensor xs({n, nf});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < nf; ++f) xs.at(i, f) = (x.at(i, f) - m.feature_mean[f]) / m.feature_std[f];

  m.weights.assign(nk, std::vector<double>(nf, 0.0));
  m.bias.assign(nk, 0.0);
  std::vector<double> grad(nf);
  for (std::size_t k = 0; k < nk; ++k) {
    double prior = 0;
    for (std::size_t i = 0; i < n; ++i) prior += y.at(i, k);
    prior = std::clamp(prior / static_cast<double>(n), 1e-3, 1.0 - 1e-3);
    auto& w = m.weights[k];
    double& b = m.bias[k];
    b = std::log(prior / (1.0 - prior));
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
      std::fill(grad.begin(), grad.end(), 0.0);
      double gb = 0;
      for (std::size_t i = 0; i < n; ++i) {
        double z = b;
        for (std::size_t f = 0; f < nf; ++f) z += w[f] * xs.at(i, f);
        const double r = 1.0 / (1.0 + std::exp(-z)) - y.at(i, k);
        gb += r;
        for (std::size_t f = 0; f < nf; ++f) grad[f] += r * xs.at(i, f);
      }
      for (std::size_t f = 0; f < nf; ++f) w[f] -= cfg.learning_rate * (grad[f] / static_cast<double>(n) + cfg.l2 * w[f]);
      b -= cfg.learning_rate * gb / static_cast<double>(n);
    }
  }
  return m;
}

// Mean, min, max and last value of every column over the observed part of
// the window (front padding rows are skipped).
inline std::vector<double> summary_features(const Tensor& window, std::size_t observed_rows) {
  const std::size_t t = window.dim(0), d = window.dim(1);
  observed_rows = std::clamp<std::size_t>(observed_rows, 1, t);
  const std::size_t first = t - observed_rows;
  std::vector<double> out(4 * d);
  for (std::size_t c = 0; c < d; ++c) {
    double sum = 0, lo = INFINITY, hi = -INFINITY;
    for (std::size_t r = first; r < t; ++r) {
      const double v = window.at(r, c);
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    out[4 * c] = sum / static_cast<double>(observed_rows);
    out[4 * c + 1] = lo;
    out[4 * c + 2] = hi;
    out[4 * c + 3] = window.at(t - 1, c);
  }
  return out;
}

inline Tensor summary_matrix(const PreparedDataset& ds, std::span<const std::size_t> idx) {
  const std::size_t nf = 4 * ds.width();
  Tensor x({idx.size(), nf});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& s = ds.samples.at(idx[i]);
    const auto f = summary_features(ds.window(s), std::min(ds.t, s.plan.prediction_hour));
    std::copy(f.begin(), f.end(), x.data().begin() + static_cast<std::ptrdiff_t>(i * nf));
  }
  return x;
}

struct BaselineResult {
  LogisticModel model;
  EvalResult train;
  EvalResult eval;
};

// Binary tasks fit one model on the positive class; phenotypes fit one per
// label. Predictions are laid out like the network head ([N,2] or [N,25]).
inline BaselineResult logistic_baseline(const PreparedDataset& ds, std::span<const std::size_t> train_idx,
                                        std::span<const std::size_t> eval_idx, const LogisticConfig& cfg = {}) {
  if (ds.task == Task::kLos) throw std::invalid_argument("logistic baseline supports binary and multi-label tasks");
  if (train_idx.empty() || eval_idx.empty()) throw std::invalid_argument("logistic baseline: empty dataset");
  const bool multi = ds.task == Task::kPhenotype;
  auto targets = [&](std::span<const std::size_t> idx) {
    const std::size_t k = multi ? kPhenotypeLabels : 1;
    Tensor y({idx.size(), k}, 0.0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto& l = ds.samples.at(idx[i]).plan.label;
      for (std::size_t j = 0; j < k; ++j) y.at(i, j) = multi ? l.multi.at(j) : l.y;
    }
    return y;
  };
  auto as_head = [&](const Tensor& p) {
    if (multi) return p;
    Tensor out({p.dim(0), 2});
    for (std::size_t i = 0; i < p.dim(0); ++i) {
      out.at(i, 1) = p.at(i, 0);
      out.at(i, 0) = 1.0 - p.at(i, 0);
    }
    return out;
  };
  BaselineResult r;
  r.model = fit_logistic(summary_matrix(ds, train_idx), targets(train_idx), cfg);
  const auto tl = labels_of(ds, train_idx);
  const auto el = labels_of(ds, eval_idx);
  r.train = evaluate_predictions(ds.task, as_head(r.model.predict(summary_matrix(ds, train_idx))), tl);
  r.eval = evaluate_predictions(ds.task, as_head(r.model.predict(summary_matrix(ds, eval_idx))), el);
  return r;
}

}  // namespace tscan
