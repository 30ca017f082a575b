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

// Batched inference over a prepared dataset and the per-task metric battery.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <thread>
#include <vector>

#include "tscan/episode.hpp"
#include "tscan/metrics.hpp"
#include "tscan/model.hpp"

namespace tscan {

// Stacks the windows of the given samples into [B, t, d].
inline Tensor stack_windows(const PreparedDataset& ds, std::span<const std::size_t> idx) {
  const std::size_t t = ds.t, d = ds.width();
  Tensor out({idx.size(), t, d}, 0.0);
  auto dst = out.data();
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const Tensor w = ds.window(ds.samples.at(idx[b]));
    std::copy(w.data().begin(), w.data().end(), dst.begin() + static_cast<std::ptrdiff_t>(b * t * d));
  }
  return out;
}

inline std::vector<SampleLabel> labels_of(const PreparedDataset& ds, std::span<const std::size_t> idx) {
  std::vector<SampleLabel> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(ds.samples.at(i).plan.label);
  return out;
}

// Runs `fn(chunk)` for every chunk index on up to `jobs` threads. Each chunk
// owns its output slot, so results do not depend on the thread count.
template <typename Fn>
void for_each_chunk(std::size_t chunks, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, chunks));
  if (jobs == 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = w; c < chunks; c += jobs) fn(c);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Class probabilities [N, C] in inference mode.
inline Tensor predict_samples(const TscanModel& model, const PreparedDataset& ds, std::span<const std::size_t> idx,
                              std::size_t jobs = 1, std::size_t batch = 32) {
  const std::size_t c = model.config().n_classes;
  if (idx.empty()) throw std::invalid_argument("predict_samples: no samples");
  Tensor out({idx.size(), c}, 0.0);
  const std::size_t chunks = (idx.size() + batch - 1) / batch;
  for_each_chunk(chunks, jobs, [&](std::size_t k) {
    const std::size_t lo = k * batch, hi = std::min(idx.size(), lo + batch);
    const Tensor probs = model.predict(stack_windows(ds, idx.subspan(lo, hi - lo)));
    std::copy(probs.data().begin(), probs.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(lo * c));
  });
  return out;
}

struct ValidationMetric {
  std::string name;
  bool minimize = false;
};

inline ValidationMetric validation_metric(Task task) {
  switch (task) {
    case Task::kLos: return {"mad", true};
    case Task::kPhenotype: return {"macro_auc", false};
    default: return {"auc_roc", false};
  }
}

namespace evaluate_detail {

inline std::vector<double> positive_column(const Tensor& probs) {
  std::vector<double> s(probs.dim(0));
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = probs.at(i, probs.dim(1) - 1);
  return s;
}

inline std::vector<int> argmax_rows(const Tensor& probs) {
  std::vector<int> out(probs.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.dim(1); ++c)
      if (probs.at(i, c) > probs.at(i, best)) best = c;
    out[i] = static_cast<int>(best);
  }
  return out;
}

}  // namespace evaluate_detail

// Metric battery on a subset of rows. Returns name -> value; undefined
// metrics (single-class subsets) are omitted.
inline std::map<std::string, double> task_metrics(Task task, const Tensor& probs,
                                                  std::span<const SampleLabel> labels,
                                                  std::span<const std::size_t> rows) {
  using namespace evaluate_detail;
  std::map<std::string, double> out;
  auto attempt = [&](const char* name, auto&& fn) {
    try {
      out[name] = fn();
    } catch (const MetricError&) {
    }
  };
  switch (task) {
    case Task::kIhm:
    case Task::kDecompensation: {
      std::vector<double> s;
      std::vector<int> y;
      const auto col = positive_column(probs);
      for (std::size_t r : rows) {
        s.push_back(col[r]);
        y.push_back(labels[r].y);
      }
      attempt("auc_roc", [&] { return metrics::auc_roc(s, y); });
      attempt("auc_pr", [&] { return metrics::auc_pr(s, y); });
      break;
    }
    case Task::kLos: {
      const auto pred_all = argmax_rows(probs);
      std::vector<int> pred, truth;
      std::vector<double> hours;
      for (std::size_t r : rows) {
        pred.push_back(pred_all[r]);
        truth.push_back(labels[r].y);
        hours.push_back(labels[r].remaining_hours);
      }
      attempt("kappa", [&] { return metrics::kappa_linear(pred, truth, kLosBuckets); });
      out["mad"] = metrics::mad_hours(pred, hours);
      break;
    }
    case Task::kPhenotype: {
      const std::size_t c = probs.dim(1);
      std::vector<double> s;
      std::vector<int> y;
      for (std::size_t r : rows) {
        for (std::size_t k = 0; k < c; ++k) {
          s.push_back(probs.at(r, k));
          y.push_back(labels[r].multi.at(k));
        }
      }
      try {
        const auto m = metrics::macro_micro_auc(s, y, c);
        out["macro_auc"] = m.macro;
        out["micro_auc"] = m.micro;
      } catch (const MetricError&) {
      }
      break;
    }
  }
  return out;
}

inline std::map<std::string, double> task_metrics(Task task, const Tensor& probs,
                                                  std::span<const SampleLabel> labels) {
  std::vector<std::size_t> rows(labels.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return task_metrics(task, probs, labels, rows);
}

// Full evaluation record, with percentile bootstrap intervals when
// `resamples` > 0.
inline EvalResult evaluate_predictions(Task task, const Tensor& probs, std::span<const SampleLabel> labels,
                                       std::size_t resamples = 0, std::uint64_t seed = 0) {
  if (labels.empty() || probs.dim(0) != labels.size()) throw std::invalid_argument("evaluate: size mismatch");
  EvalResult r;
  r.values = task_metrics(task, probs, labels);
  r.sample_count = labels.size();
  r.metadata["task"] = to_string(task);
  if (r.values.count("auc_pr")) r.metadata["auc_pr"] = "average precision, step-wise over descending thresholds";
  if (r.values.count("mad")) r.metadata["mad"] = "bucket midpoints as hour estimates, 720h for the open bucket";
  for (const auto& [name, point] : r.values) {
    if (resamples == 0) break;
    const std::string key = name;
    auto ci = metrics::bootstrap_ci(
        labels.size(),
        [&](std::span<const std::size_t> rows) {
          auto m = task_metrics(task, probs, labels, rows);
          auto it = m.find(key);
          if (it == m.end()) throw MetricError("undefined on resample");
          return it->second;
        },
        point, resamples, seed);
    if (ci) r.intervals[name] = *ci;
  }
  if (resamples) r.metadata["bootstrap_resamples"] = resamples;
  return r;
}

}  // namespace tscan
