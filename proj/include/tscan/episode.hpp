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

// Cohort selection, event matching, hourly episode assembly and per-task
// sample extraction.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tscan/dictionary.hpp"
#include "tscan/metrics.hpp"
#include "tscan/model.hpp"
#include "tscan/records.hpp"
#include "tscan/tensor.hpp"

namespace tscan {

// Record counts through one pipeline stage. Every input lands either in
// `kept` or in exactly one drop bucket.
struct StageReport {
  std::string stage;
  std::size_t input = 0;
  std::size_t kept = 0;
  std::map<std::string, std::size_t> dropped;
  std::map<std::string, std::size_t> counts;  // informational, not part of conservation

  std::size_t dropped_total() const {
    std::size_t n = 0;
    for (const auto& [_, v] : dropped) n += v;
    return n;
  }
  bool conserved() const { return kept + dropped_total() == input; }

  void merge(const StageReport& o) {
    input += o.input;
    kept += o.kept;
    for (const auto& [k, v] : o.dropped) dropped[k] += v;
    for (const auto& [k, v] : o.counts) counts[k] += v;
  }
};

inline void to_json(nlohmann::json& j, const StageReport& r) {
  j = {{"stage", r.stage}, {"input", r.input}, {"kept", r.kept}, {"dropped", r.dropped}, {"counts", r.counts}};
}
inline void from_json(const nlohmann::json& j, StageReport& r) {
  r.stage = j.at("stage").get<std::string>();
  r.input = j.at("input").get<std::size_t>();
  r.kept = j.at("kept").get<std::size_t>();
  r.dropped = j.at("dropped").get<std::map<std::string, std::size_t>>();
  r.counts = j.value("counts", std::map<std::string, std::size_t>{});
}

namespace episode_detail {
inline std::size_t distinct_subjects(std::span<const StayRecord> stays) {
  std::set<std::string> s;
  for (const auto& st : stays) s.insert(st.subject_id);
  return s.size();
}
}  // namespace episode_detail

// ---------------------------------------------------------------------------
// Stage 1: stays
// ---------------------------------------------------------------------------

struct FilterResult {
  std::vector<StayRecord> stays;
  StageReport report;
};

// Keeps adults with exactly one ICU stay and no transfers. Reasons are checked
// in the order minor, multiple_stays, transfer.
inline FilterResult filter_stays(std::span<const StayRecord> stays) {
  FilterResult r;
  r.report.stage = "filter_stays";
  r.report.input = stays.size();
  r.report.dropped = {{"minor", 0}, {"multiple_stays", 0}, {"transfer", 0}};
  std::map<std::string, std::size_t> per_subject;
  for (const auto& s : stays) ++per_subject[s.subject_id];
  for (const auto& s : stays) {
    if (s.age_years <= 18.0) {
      ++r.report.dropped["minor"];
    } else if (per_subject[s.subject_id] > 1) {
      ++r.report.dropped["multiple_stays"];
    } else if (s.transfers > 0) {
      ++r.report.dropped["transfer"];
    } else {
      r.stays.push_back(s);
    }
  }
  std::stable_sort(r.stays.begin(), r.stays.end(), [](const StayRecord& a, const StayRecord& b) {
    if (a.subject_id != b.subject_id) return id_less(a.subject_id, b.subject_id);
    return a.intime < b.intime;
  });
  r.report.kept = r.stays.size();
  r.report.counts = {{"subjects_in", episode_detail::distinct_subjects(stays)},
                     {"subjects_kept", episode_detail::distinct_subjects(r.stays)}};
  return r;
}

// ---------------------------------------------------------------------------
// Stage 2: events
// ---------------------------------------------------------------------------

struct MatchResult {
  std::vector<EventRecord> events;
  StageReport report;
};

inline MatchResult match_events(std::span<const EventRecord> events, std::span<const StayRecord> stays) {
  MatchResult r;
  r.report.stage = "match_events";
  r.report.input = events.size();
  r.report.dropped = {{"no_hadm", 0}, {"unknown_hadm", 0}, {"unknown_stay", 0}};
  std::map<std::string, std::vector<std::string>> stays_by_hadm;
  std::set<std::string> stay_ids;
  for (const auto& s : stays) {
    stays_by_hadm[s.hadm_id].push_back(s.icustay_id);
    stay_ids.insert(s.icustay_id);
  }
  std::size_t recovered = 0;
  for (const auto& e : events) {
    if (!e.hadm_id) {
      ++r.report.dropped["no_hadm"];
      continue;
    }
    auto it = stays_by_hadm.find(*e.hadm_id);
    if (it == stays_by_hadm.end()) {
      ++r.report.dropped["unknown_hadm"];
      continue;
    }
    EventRecord kept = e;
    if (!kept.icustay_id) {
      if (it->second.size() != 1) {
        ++r.report.dropped["unknown_stay"];
        continue;
      }
      kept.icustay_id = it->second.front();
      ++recovered;
    } else if (!stay_ids.count(*kept.icustay_id)) {
      ++r.report.dropped["unknown_stay"];
      continue;
    }
    r.events.push_back(std::move(kept));
  }
  r.report.kept = r.events.size();
  r.report.counts = {{"icustay_recovered", recovered}};
  return r;
}

// ---------------------------------------------------------------------------
// Stage 3: episodes
// ---------------------------------------------------------------------------

struct Episode {
  std::string icustay_id;
  std::string subject_id;
  Tensor values;  // [hours, d]
  Tensor mask;    // [hours, d], 1 where observed in that hour
  double los_hours = 0.0;
  bool mortality = false;
  std::optional<double> death_hours;  // from intime
  std::optional<std::vector<int>> phenotypes;

  std::size_t hours() const { return values.dim(0); }
  std::size_t width() const { return values.dim(1); }

  friend bool operator==(const Episode&, const Episode&) = default;
};

struct AssembleResult {
  Episode episode;
  StageReport report;
};

inline std::size_t episode_hours(const StayRecord& stay) {
  const auto secs = stay.outtime - stay.intime;
  return std::max<std::size_t>(1, static_cast<std::size_t>((secs + 3599) / 3600));
}

inline AssembleResult assemble_episode(std::span<const EventRecord> events, const VariableDictionary& dict,
                                       const StayRecord& stay) {
  if (dict.size() == 0) throw std::invalid_argument("assemble_episode: empty dictionary");
  const std::size_t hours = episode_hours(stay);
  const std::size_t nv = dict.size();

  struct Obs {
    TimePoint time;
    double value;  // continuous raw value or category index
  };
  std::vector<std::optional<Obs>> slots(hours * nv);

  AssembleResult r;
  r.report.stage = "assemble_episode";
  r.report.input = events.size();
  r.report.dropped = {{"out_of_window", 0}, {"outlier", 0}, {"superseded", 0}};
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    const auto vi = dict.find(e.variable);
    if (!vi) throw std::invalid_argument("event " + std::to_string(i) + ": unknown variable '" + e.variable + "'");
    const auto& var = dict[*vi];
    double value;
    if (var.kind == VariableKind::kCategorical) {
      auto ci = var.category_index(e.value);
      if (!ci) {
        throw std::invalid_argument("event " + std::to_string(i) + ": unknown category '" + e.value + "' for " +
                                    var.name);
      }
      value = static_cast<double>(*ci);
    } else {
      value = detail::parse_double(e.value, "event " + std::to_string(i) + " (" + var.name + ")");
    }
    const auto offset = e.charttime - stay.intime;
    if (offset < 0 || static_cast<std::size_t>(offset / 3600) >= hours) {
      ++r.report.dropped["out_of_window"];
      continue;
    }
    if (var.kind == VariableKind::kContinuous && !(value >= var.range_lo && value <= var.range_hi)) {
      ++r.report.dropped["outlier"];
      continue;
    }
    auto& slot = slots[static_cast<std::size_t>(offset / 3600) * nv + *vi];
    if (slot) ++r.report.dropped["superseded"];
    if (!slot || e.charttime >= slot->time) slot = Obs{e.charttime, value};
  }

  const std::size_t d = dict.width();
  Episode& ep = r.episode;
  ep.icustay_id = stay.icustay_id;
  ep.subject_id = stay.subject_id;
  ep.values = Tensor({hours, d}, 0.0);
  ep.mask = Tensor({hours, d}, 0.0);
  ep.los_hours = stay.los_hours();
  ep.mortality = stay.mortality_in_hospital;
  if (stay.deathtime) ep.death_hours = static_cast<double>(*stay.deathtime - stay.intime) / 3600.0;

  std::size_t observed = 0;
  for (std::size_t v = 0; v < nv; ++v) {
    const auto& var = dict[v];
    const std::size_t off = dict.offset(v);
    double last = var.kind == VariableKind::kContinuous ? var.normal_value
                                                         : static_cast<double>(*var.category_index(var.normal_category));
    for (std::size_t h = 0; h < hours; ++h) {
      const auto& slot = slots[h * nv + v];
      if (slot) {
        last = slot->value;
        ++observed;
        for (std::size_t c = 0; c < var.width(); ++c) ep.mask.at(h, off + c) = 1.0;
      }
      if (var.kind == VariableKind::kContinuous) {
        ep.values.at(h, off) = (last - var.mean) / var.stdev;
      } else {
        ep.values.at(h, off + static_cast<std::size_t>(last)) = 1.0;
      }
    }
  }
  r.report.kept = observed;
  return r;
}

// ---------------------------------------------------------------------------
// Stage 4: samples
// ---------------------------------------------------------------------------

struct TaskDefaults {
  std::size_t t;
  std::size_t stride;
  std::size_t n;
};

inline TaskDefaults task_defaults(Task task) {
  switch (task) {
    case Task::kIhm: return {48, 1, 4};
    case Task::kLos: return {320, 12, 4};
    case Task::kDecompensation: return {320, 1, 4};
    case Task::kPhenotype: return {320, 1, 4};
  }
  return {48, 1, 4};
}

inline constexpr double kIhmHour = 48.0;
inline constexpr double kFirstSampleHour = 4.0;
inline constexpr double kDecompensationHorizon = 24.0;

struct SampleLabel {
  int y = 0;               // binary label or LOS bucket
  std::vector<int> multi;  // phenotype flags
  double remaining_hours = 0.0;

  friend bool operator==(const SampleLabel&, const SampleLabel&) = default;
};

// Where to cut a sample and what it is labelled; the window is materialized
// on demand so that dense tasks do not hold every window in memory.
struct SamplePlan {
  std::size_t prediction_hour = 0;
  SampleLabel label;

  friend bool operator==(const SamplePlan&, const SamplePlan&) = default;
};

struct Sample {
  Tensor x;  // [t, d]
  SampleLabel y;
  double prediction_time = 0.0;
  std::string icustay_id;
};

inline std::vector<SamplePlan> plan_samples(const Episode& ep, Task task, std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("stride must be positive");
  std::vector<SamplePlan> out;
  switch (task) {
    case Task::kIhm:
      if (ep.los_hours >= kIhmHour) out.push_back({static_cast<std::size_t>(kIhmHour), {ep.mortality ? 1 : 0, {}, 0}});
      break;
    case Task::kLos:
    case Task::kDecompensation:
      for (std::size_t h = static_cast<std::size_t>(kFirstSampleHour); static_cast<double>(h) < ep.los_hours;
           h += stride) {
        SamplePlan p{h, {}};
        p.label.remaining_hours = ep.los_hours - static_cast<double>(h);
        if (task == Task::kLos) {
          p.label.y = metrics::los_bucket(p.label.remaining_hours);
        } else if (ep.death_hours) {
          const double until = *ep.death_hours - static_cast<double>(h);
          p.label.y = until >= 0.0 && until <= kDecompensationHorizon ? 1 : 0;
        }
        out.push_back(std::move(p));
      }
      break;
    case Task::kPhenotype:
      if (!ep.phenotypes) throw std::invalid_argument("stay " + ep.icustay_id + " has no phenotype labels");
      out.push_back({ep.hours(), {0, *ep.phenotypes, 0}});
      break;
  }
  return out;
}

// Rows for hours [end - t, end), zero-padded at the front.
inline Tensor sample_window(const Episode& ep, std::size_t end_hour, std::size_t t) {
  if (t == 0) throw std::invalid_argument("window length t must be positive");
  const std::size_t d = ep.width();
  Tensor x({t, d}, 0.0);
  const std::size_t end = std::min(end_hour, ep.hours());
  const std::size_t begin = end > t ? end - t : 0;
  const std::size_t pad = t - (end - begin);
  const auto src = ep.values.data();
  auto dst = x.data();
  std::copy(src.begin() + static_cast<std::ptrdiff_t>(begin * d), src.begin() + static_cast<std::ptrdiff_t>(end * d),
            dst.begin() + static_cast<std::ptrdiff_t>(pad * d));
  return x;
}

inline std::vector<Sample> extract_samples(const Episode& ep, Task task, std::size_t t, std::size_t stride) {
  if (t == 0) throw std::invalid_argument("window length t must be positive");
  std::vector<Sample> out;
  for (auto& p : plan_samples(ep, task, stride)) {
    out.push_back({sample_window(ep, p.prediction_hour, t), std::move(p.label),
                   static_cast<double>(p.prediction_hour), ep.icustay_id});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prepared dataset
// ---------------------------------------------------------------------------

struct SampleRef {
  std::size_t episode = 0;
  SamplePlan plan;
};

struct PreparedDataset {
  Task task = Task::kIhm;
  std::size_t t = 48;
  std::size_t stride = 1;
  VariableDictionary dictionary;
  std::vector<Episode> episodes;
  std::vector<SampleRef> samples;
  std::vector<StageReport> stages;

  std::size_t width() const { return dictionary.width(); }

  Tensor window(const SampleRef& s) const { return sample_window(episodes.at(s.episode), s.plan.prediction_hour, t); }
  Sample sample(std::size_t i) const {
    const auto& s = samples.at(i);
    return {window(s), s.plan.label, static_cast<double>(s.plan.prediction_hour), episodes[s.episode].icustay_id};
  }
  const std::string& subject_of(std::size_t i) const { return episodes.at(samples.at(i).episode).subject_id; }

  void save(const std::filesystem::path& dir) const;
  static PreparedDataset load(const std::filesystem::path& dir);
};

// Runs selection, matching, assembly and extraction end to end.
inline PreparedDataset prepare_dataset(std::span<const StayRecord> stays, std::span<const EventRecord> events,
                                       std::span<const PhenotypeLabels> phenotypes, const VariableDictionary& dict,
                                       Task task, std::size_t t, std::size_t stride) {
  if (t == 0 || stride == 0) throw std::invalid_argument("t and stride must be positive");
  PreparedDataset ds;
  ds.task = task;
  ds.t = t;
  ds.stride = stride;
  ds.dictionary = dict;

  auto filtered = filter_stays(stays);
  auto matched = match_events(events, filtered.stays);
  ds.stages.push_back(filtered.report);
  ds.stages.push_back(matched.report);

  std::map<std::string, std::vector<EventRecord>> by_stay;
  for (auto& e : matched.events) by_stay[*e.icustay_id].push_back(std::move(e));
  std::map<std::string, const PhenotypeLabels*> labels;
  for (const auto& l : phenotypes) labels[l.icustay_id] = &l;

  StageReport assembled{"assemble_episode", 0, 0, {{"out_of_window", 0}, {"outlier", 0}, {"superseded", 0}}, {}};
  StageReport extracted{"extract_samples", 0, 0, {{"no_samples", 0}, {"missing_labels", 0}}, {}};
  static const std::vector<EventRecord> kNoEvents;
  for (const auto& stay : filtered.stays) {
    auto it = by_stay.find(stay.icustay_id);
    AssembleResult a;
    try {
      a = assemble_episode(it == by_stay.end() ? kNoEvents : it->second, dict, stay);
    } catch (const std::exception& e) {
      throw std::invalid_argument("stay " + stay.icustay_id + ": " + e.what());
    }
    assembled.merge(a.report);
    ++extracted.input;
    if (auto l = labels.find(stay.icustay_id); l != labels.end()) a.episode.phenotypes = l->second->flags;
    if (task == Task::kPhenotype && !a.episode.phenotypes) {
      ++extracted.dropped["missing_labels"];
      continue;
    }
    auto plans = plan_samples(a.episode, task, stride);
    if (plans.empty()) {
      ++extracted.dropped["no_samples"];
      continue;
    }
    ++extracted.kept;
    extracted.counts["samples"] += plans.size();
    const std::size_t idx = ds.episodes.size();
    ds.episodes.push_back(std::move(a.episode));
    for (auto& p : plans) ds.samples.push_back({idx, std::move(p)});
  }
  ds.stages.push_back(assembled);
  ds.stages.push_back(extracted);
  return ds;
}

namespace episode_detail {

inline std::string flags_str(const std::vector<int>& flags) {
  std::string s;
  for (int f : flags) s += f ? '1' : '0';
  return s;
}

inline std::vector<int> parse_flags(const std::string& s) {
  std::vector<int> out;
  for (char c : s) {
    if (c != '0' && c != '1') throw ParseError("bad flag string '" + s + "'");
    out.push_back(c == '1');
  }
  return out;
}

inline std::string episode_file(const std::string& icustay_id) { return "episodes/" + icustay_id + ".csv"; }

}  // namespace episode_detail

inline void write_episode_csv(const std::filesystem::path& path, const Episode& ep,
                              const std::vector<std::string>& columns) {
  csv::Writer w(path.string());
  std::vector<std::string> header{"hour"};
  header.insert(header.end(), columns.begin(), columns.end());
  for (const auto& c : columns) header.push_back("mask:" + c);
  w.row(header);
  const std::size_t d = ep.width();
  for (std::size_t h = 0; h < ep.hours(); ++h) {
    std::vector<std::string> row{std::to_string(h)};
    for (std::size_t c = 0; c < d; ++c) row.push_back(csv::num(ep.values.at(h, c)));
    for (std::size_t c = 0; c < d; ++c) row.push_back(ep.mask.at(h, c) != 0.0 ? "1" : "0");
    w.row(row);
  }
  w.close();
}

inline void read_episode_csv(const std::filesystem::path& path, Episode& ep, std::size_t d) {
  const auto table = csv::Table::read(path.string());
  if (table.header().size() != 1 + 2 * d) {
    throw ParseError(path.string() + ": expected " + std::to_string(1 + 2 * d) + " columns");
  }
  const std::size_t hours = table.rows().size();
  if (hours == 0) throw ParseError(path.string() + ": no rows");
  ep.values = Tensor({hours, d}, 0.0);
  ep.mask = Tensor({hours, d}, 0.0);
  for (std::size_t h = 0; h < hours; ++h) {
    const auto& row = table.rows()[h];
    const std::string where = path.string() + " row " + std::to_string(h + 1);
    for (std::size_t c = 0; c < d; ++c) {
      ep.values.at(h, c) = detail::parse_double(row[1 + c], where);
      ep.mask.at(h, c) = detail::parse_flag(row[1 + d + c], where) ? 1.0 : 0.0;
    }
  }
}

// Layout: manifest.json, samples.csv and one CSV per stay under episodes/.
inline void PreparedDataset::save(const std::filesystem::path& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "episodes");
  const auto columns = dictionary.column_names();
  nlohmann::json eps = nlohmann::json::array();
  for (const auto& ep : episodes) {
    write_episode_csv(dir / episode_detail::episode_file(ep.icustay_id), ep, columns);
    nlohmann::json e{{"icustay_id", ep.icustay_id}, {"subject_id", ep.subject_id},   {"hours", ep.hours()},
                     {"los_hours", ep.los_hours},   {"mortality", ep.mortality},       {"death_hours", nullptr},
                     {"phenotypes", nullptr},       {"file", episode_detail::episode_file(ep.icustay_id)}};
    if (ep.death_hours) e["death_hours"] = *ep.death_hours;
    if (ep.phenotypes) e["phenotypes"] = episode_detail::flags_str(*ep.phenotypes);
    eps.push_back(std::move(e));
  }
  csv::Writer w((dir / "samples.csv").string());
  w.row({"icustay_id", "prediction_hour", "label", "remaining_hours"});
  for (const auto& s : samples) {
    const auto& l = s.plan.label;
    w.row({episodes[s.episode].icustay_id, std::to_string(s.plan.prediction_hour),
           task == Task::kPhenotype ? episode_detail::flags_str(l.multi) : std::to_string(l.y),
           csv::num(l.remaining_hours)});
  }
  w.close();
  const nlohmann::json manifest{{"format", "tscan-episodes/1"},
                                {"task", to_string(task)},
                                {"t", t},
                                {"stride", stride},
                                {"d", dictionary.width()},
                                {"dictionary", dictionary.to_json()},
                                {"stages", stages},
                                {"episodes", eps},
                                {"sample_count", samples.size()}};
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << manifest.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + (dir / "manifest.json").string());
}

inline PreparedDataset PreparedDataset::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("cannot open " + (dir / "manifest.json").string());
  nlohmann::json m;
  in >> m;
  if (m.value("format", "") != "tscan-episodes/1") throw ParseError("unrecognized dataset manifest format");
  PreparedDataset ds;
  ds.task = parse_task(m.at("task").get<std::string>());
  ds.t = m.at("t").get<std::size_t>();
  ds.stride = m.at("stride").get<std::size_t>();
  ds.dictionary = VariableDictionary::from_json(m.at("dictionary"));
  ds.stages = m.at("stages").get<std::vector<StageReport>>();
  if (m.at("d").get<std::size_t>() != ds.dictionary.width()) throw ParseError("manifest d disagrees with dictionary");
  std::map<std::string, std::size_t> index;
  for (const auto& e : m.at("episodes")) {
    Episode ep;
    ep.icustay_id = e.at("icustay_id").get<std::string>();
    ep.subject_id = e.at("subject_id").get<std::string>();
    ep.los_hours = e.at("los_hours").get<double>();
    ep.mortality = e.at("mortality").get<bool>();
    if (!e.at("death_hours").is_null()) ep.death_hours = e.at("death_hours").get<double>();
    if (!e.at("phenotypes").is_null()) ep.phenotypes = episode_detail::parse_flags(e.at("phenotypes"));
    read_episode_csv(dir / e.at("file").get<std::string>(), ep, ds.dictionary.width());
    index[ep.icustay_id] = ds.episodes.size();
    ds.episodes.push_back(std::move(ep));
  }
  const auto table = csv::Table::read((dir / "samples.csv").string());
  const std::size_t c_icu = table.column("icustay_id"), c_h = table.column("prediction_hour"),
                    c_y = table.column("label"), c_rem = table.column("remaining_hours");
  for (std::size_t r = 0; r < table.rows().size(); ++r) {
    const auto& row = table.rows()[r];
    const std::string where = "samples.csv row " + std::to_string(r + 1);
    auto it = index.find(row[c_icu]);
    if (it == index.end()) throw ParseError(where + ": unknown stay " + row[c_icu]);
    SampleRef s{it->second, {}};
    s.plan.prediction_hour = static_cast<std::size_t>(detail::parse_double(row[c_h], where));
    if (ds.task == Task::kPhenotype) {
      s.plan.label.multi = episode_detail::parse_flags(row[c_y]);
    } else {
      s.plan.label.y = static_cast<int>(detail::parse_double(row[c_y], where));
    }
    s.plan.label.remaining_hours = detail::parse_double(row[c_rem], where);
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.size() != m.at("sample_count").get<std::size_t>()) throw ParseError("sample count mismatch");
  return ds;
}

}  // namespace tscan
