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

// Aggregated self-attention weights: per-hour weights within each temporal
// chunk and per-column weights over the spatial branch's variable tokens.

#pragma once

#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tscan/dictionary.hpp"
#include "tscan/episode.hpp"
#include "tscan/evaluate.hpp"
#include "tscan/model.hpp"
#include "tscan/records.hpp"

namespace tscan {

struct AttentionReport {
  std::vector<std::vector<double>> temporal;  // [n][t/n], empty without a temporal branch
  std::vector<double> indicator;              // [d], empty without a spatial branch
  std::size_t sample_count = 0;
  nlohmann::json metadata = nlohmann::json::object();

  // Indicator weights summed over each variable's one-hot columns.
  std::vector<double> per_variable(const VariableDictionary& dict) const {
    if (indicator.size() != dict.width()) throw std::invalid_argument("indicator width does not match dictionary");
    std::vector<double> out(dict.size(), 0.0);
    const auto owner = dict.column_owner();
    for (std::size_t c = 0; c < indicator.size(); ++c) out[owner[c]] += indicator[c];
    return out;
  }

  nlohmann::json to_json() const {
    return {{"temporal_weights", temporal},
            {"indicator_weights", indicator},
            {"sample_count", sample_count},
            {"metadata", metadata}};
  }

  // temporal_chunk_<j>.csv (hour,weight), indicators.csv (column,variable,weight),
  // variables.csv (variable,weight) and report.json.
  void write(const std::filesystem::path& dir, const VariableDictionary& dict) const {
    std::filesystem::create_directories(dir);
    for (std::size_t j = 0; j < temporal.size(); ++j) {
      csv::Writer w((dir / ("temporal_chunk_" + std::to_string(j) + ".csv")).string());
      w.row({"hour", "weight"});
      const std::size_t len = temporal[j].size();
      for (std::size_t h = 0; h < len; ++h) w.row({std::to_string(j * len + h), csv::num(temporal[j][h])});
      w.close();
    }
    if (!indicator.empty()) {
      const auto names = dict.column_names();
      const auto owner = dict.column_owner();
      csv::Writer w((dir / "indicators.csv").string());
      w.row({"column", "variable", "weight"});
      for (std::size_t c = 0; c < indicator.size(); ++c) w.row({names[c], dict[owner[c]].name, csv::num(indicator[c])});
      w.close();
      const auto grouped = per_variable(dict);
      csv::Writer g((dir / "variables.csv").string());
      g.row({"variable", "weight"});
      for (std::size_t v = 0; v < grouped.size(); ++v) g.row({dict[v].name, csv::num(grouped[v])});
      g.close();
    }
    std::ofstream out(dir / "report.json", std::ios::trunc);
    out << to_json().dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing report.json");
  }
};

namespace explain_detail {

// Adds sum over batch, heads and query rows of probs[..., k] into acc[k].
inline void accumulate_received(const Tensor& probs, std::vector<double>& acc) {
  const std::size_t keys = probs.dim(-1);
  if (acc.empty()) acc.assign(keys, 0.0);
  const auto p = probs.data();
  for (std::size_t i = 0; i < p.size(); ++i) acc[i % keys] += p[i];
}

inline void normalize(std::vector<double>& v) {
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  if (s > 0.0)
    for (double& x : v) x /= s;
}

}  // namespace explain_detail

// Mean over samples, heads and query rows of the self-attention each key
// position receives, renormalized per chunk (temporal) or over d (spatial).
inline AttentionReport attention_report(const TscanModel& model, const Tensor& windows, std::size_t batch = 32) {
  const auto& cfg = model.config();
  const Tensor x = windows.rank() == 2 ? kernels::reshape(windows, {1, windows.dim(0), windows.dim(1)}) : windows;
  if (x.rank() != 3 || x.dim(0) == 0) throw std::invalid_argument("attention_report: empty sample set");
  AttentionReport r;
  r.sample_count = x.dim(0);
  std::vector<std::vector<double>> temporal;
  std::vector<double> indicator;
  for (std::size_t lo = 0; lo < x.dim(0); lo += batch) {
    const std::size_t hi = std::min(x.dim(0), lo + batch);
    Tape tape;
    const auto out = model.forward(tape, kernels::slice(x, 0, lo, hi));
    if (out.temporal) {
      temporal.resize(out.temporal->self_attention.size());
      for (std::size_t j = 0; j < temporal.size(); ++j)
        explain_detail::accumulate_received(out.temporal->self_attention[j].probs, temporal[j]);
    }
    if (out.spatial) {
      for (const auto& w : out.spatial->self_attention) explain_detail::accumulate_received(w.probs, indicator);
    }
  }
  for (auto& v : temporal) explain_detail::normalize(v);
  explain_detail::normalize(indicator);
  r.temporal = std::move(temporal);
  r.indicator = std::move(indicator);
  r.metadata = {{"aggregation",
                 "mean over samples, heads and query rows of self-attention received per key position; "
                 "temporal renormalized per chunk, indicators averaged over all chunks and renormalized over d"},
                {"chunks", cfg.n},
                {"chunk_length", cfg.chunk_length()},
                {"d", cfg.d},
                {"fusion", to_string(cfg.fusion)}};
  return r;
}

inline AttentionReport attention_report(const TscanModel& model, const PreparedDataset& ds,
                                        std::span<const std::size_t> idx) {
  if (idx.empty()) throw std::invalid_argument("attention_report: empty sample set");
  return attention_report(model, stack_windows(ds, idx));
}

}  // namespace tscan
