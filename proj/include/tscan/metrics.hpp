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

// Evaluation metrics for the four ICU tasks.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tscan {

// Raised when a metric is undefined for the given input (e.g. one class only).
class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace metrics {

namespace detail {

struct Counts {
  std::size_t pos = 0, neg = 0;
};

inline Counts count_classes(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("scores and labels differ in length (" + std::to_string(scores.size()) +
                                " vs " + std::to_string(labels.size()) + ")");
  }
  Counts c;
  for (int y : labels) {
    if (y == 1) ++c.pos;
    else if (y == 0) ++c.neg;
    else throw std::invalid_argument("labels must be 0 or 1");
  }
  if (c.pos == 0 || c.neg == 0) throw MetricError("AUC is undefined when only one class is present");
  return c;
}

inline std::vector<std::size_t> order_descending(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace detail

// Area under the ROC curve by trapezoids over distinct score thresholds;
// tied scores contribute half a concordant pair.
inline double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  const auto c = detail::count_classes(scores, labels);
  const auto idx = detail::order_descending(scores);
  double area = 0.0;
  double tp = 0, fp = 0, tp_prev = 0, fp_prev = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (labels[idx[i]] == 1) tp += 1; else fp += 1;
    if (i + 1 == idx.size() || scores[idx[i + 1]] != scores[idx[i]]) {
      area += (fp - fp_prev) * (tp + tp_prev) / 2.0;
      tp_prev = tp;
      fp_prev = fp;
    }
  }
  return area / (static_cast<double>(c.pos) * static_cast<double>(c.neg));
}

// Average precision: sum over descending thresholds of (R_k - R_{k-1}) * P_k.
inline double auc_pr(std::span<const double> scores, std::span<const int> labels) {
  const auto c = detail::count_classes(scores, labels);
  const auto idx = detail::order_descending(scores);
  double ap = 0.0, tp = 0, fp = 0, recall_prev = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (labels[idx[i]] == 1) tp += 1; else fp += 1;
    if (i + 1 == idx.size() || scores[idx[i + 1]] != scores[idx[i]]) {
      const double recall = tp / static_cast<double>(c.pos);
      ap += (recall - recall_prev) * (tp / (tp + fp));
      recall_prev = recall;
    }
  }
  return ap;
}

// Cohen's kappa with linear weights |i-j|/(n-1).
inline double kappa_linear(std::span<const int> pred, std::span<const int> truth,
                           std::size_t n_buckets = 10) {
  if (pred.empty()) throw std::invalid_argument("kappa_linear: empty input");
  if (pred.size() != truth.size()) throw std::invalid_argument("kappa_linear: length mismatch");
  if (n_buckets < 2) throw std::invalid_argument("kappa_linear: need at least two buckets");
  const std::size_t n = n_buckets;
  std::vector<double> observed(n * n, 0.0), row(n, 0.0), col(n, 0.0);
  for (std::size_t s = 0; s < pred.size(); ++s) {
    const int a = pred[s], b = truth[s];
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n || static_cast<std::size_t>(b) >= n) {
      throw std::invalid_argument("kappa_linear: bucket index out of range");
    }
    observed[static_cast<std::size_t>(a) * n + static_cast<std::size_t>(b)] += 1.0;
    row[static_cast<std::size_t>(a)] += 1.0;
    col[static_cast<std::size_t>(b)] += 1.0;
  }
  const double total = static_cast<double>(pred.size());
  double wo = 0.0, we = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double w = std::abs(static_cast<double>(i) - static_cast<double>(j)) / static_cast<double>(n - 1);
      wo += w * observed[i * n + j];
      we += w * row[i] * col[j] / total;
    }
  }
  if (we == 0.0) {
    // Both raters put everything in one bucket.
    if (wo == 0.0) return 1.0;
    throw MetricError("kappa_linear: expected disagreement is zero");
  }
  return 1.0 - wo / we;
}

// Remaining-stay buckets in hours: [0,24), [24,48), ..., [168,192), [192,336), [336,inf).
inline int los_bucket(double remaining_hours) {
  if (!(remaining_hours >= 0.0)) throw std::invalid_argument("remaining hours must be nonnegative");
  if (remaining_hours < 192.0) return static_cast<int>(remaining_hours / 24.0);
  if (remaining_hours < 336.0) return 8;
  return 9;
}

// Scalar stand-in for a bucket: its midpoint, 720h for the open top bucket.
inline double bucket_representative_hours(int bucket) {
  if (bucket < 0 || bucket > 9) throw std::invalid_argument("bucket out of range");
  if (bucket < 8) return 24.0 * bucket + 12.0;
  if (bucket == 8) return 264.0;
  return 720.0;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty input");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Median absolute deviation in hours between bucket representatives and truth.
inline double mad_hours(std::span<const int> pred_buckets, std::span<const double> true_hours) {
  if (pred_buckets.empty()) throw std::invalid_argument("mad_hours: empty input");
  if (pred_buckets.size() != true_hours.size()) throw std::invalid_argument("mad_hours: length mismatch");
  std::vector<double> dev(pred_buckets.size());
  for (std::size_t i = 0; i < dev.size(); ++i)
    dev[i] = std::abs(bucket_representative_hours(pred_buckets[i]) - true_hours[i]);
  return median(std::move(dev));
}

struct MultiLabelAuc {
  double macro = 0.0;
  double micro = 0.0;
  std::vector<std::size_t> skipped_labels;
};

// Destination for metric warnings; nullptr silences them.
inline std::ostream*& warning_stream() {
  static std::ostream* stream = &std::cerr;
  return stream;
}

// scores/labels are row-major [samples, labels].
inline MultiLabelAuc macro_micro_auc(std::span<const double> scores, std::span<const int> labels,
                                     std::size_t n_labels) {
  if (n_labels == 0 || scores.size() != labels.size() || scores.size() % n_labels != 0) {
    throw std::invalid_argument("macro_micro_auc: inconsistent matrix sizes");
  }
  const std::size_t rows = scores.size() / n_labels;
  MultiLabelAuc r;
  double acc = 0.0;
  std::size_t used = 0;
  std::vector<double> col_s(rows);
  std::vector<int> col_y(rows);
  for (std::size_t c = 0; c < n_labels; ++c) {
    for (std::size_t i = 0; i < rows; ++i) {
      col_s[i] = scores[i * n_labels + c];
      col_y[i] = labels[i * n_labels + c];
    }
    try {
      acc += auc_roc(col_s, col_y);
      ++used;
    } catch (const MetricError&) {
      r.skipped_labels.push_back(c);
    }
  }
  if (used == 0) throw MetricError("macro AUC undefined: every label column has a single class");
  if (!r.skipped_labels.empty() && warning_stream()) {
    *warning_stream() << "warning: macro AUC skipped " << r.skipped_labels.size() << " single-class label(s)\n";
  }
  r.macro = acc / static_cast<double>(used);
  r.micro = auc_roc(scores, labels);
  return r;
}

struct Interval {
  double lo = 0.0, hi = 0.0;
};

// Percentile bootstrap over sample indices. Resamples on which the metric is
// undefined are skipped. The interval is widened to include the point estimate.
template <typename MetricFn>
std::optional<Interval> bootstrap_ci(std::size_t n, MetricFn&& metric, double point,
                                     std::size_t resamples = 1000, std::uint64_t seed = 0,
                                     double level = 0.95) {
  if (n == 0) return std::nullopt;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> values;
  std::vector<std::size_t> idx(n);
  for (std::size_t r = 0; r < resamples; ++r) {
    for (auto& i : idx) i = pick(rng);
    try {
      values.push_back(metric(std::span<const std::size_t>(idx)));
    } catch (const MetricError&) {
    }
  }
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const double alpha = (1.0 - level) / 2.0;
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
  };
  return Interval{std::min(q(alpha), point), std::max(q(1.0 - alpha), point)};
}

}  // namespace metrics

struct EvalResult {
  std::map<std::string, double> values;
  std::size_t sample_count = 0;
  std::map<std::string, metrics::Interval> intervals;
  nlohmann::json metadata = nlohmann::json::object();
};

inline void to_json(nlohmann::json& j, const EvalResult& r) {
  nlohmann::json ci = nlohmann::json::object();
  for (const auto& [k, v] : r.intervals) ci[k] = {v.lo, v.hi};
  j = {{"metrics", r.values}, {"sample_count", r.sample_count}, {"ci95", ci}, {"metadata", r.metadata}};
}

inline void from_json(const nlohmann::json& j, EvalResult& r) {
  r.values = j.at("metrics").get<std::map<std::string, double>>();
  r.sample_count = j.value("sample_count", std::size_t{0});
  if (j.contains("ci95"))
    for (const auto& [k, v] : j.at("ci95").items()) r.intervals[k] = {v.at(0).get<double>(), v.at(1).get<double>()};
  r.metadata = j.value("metadata", nlohmann::json::object());
}

}  // namespace tscan
