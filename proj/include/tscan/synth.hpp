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

// Synthetic ICU cohort with a planted, documented signal.
//
// Each patient draws a latent severity s ~ N(0, 1). Selected variables drift
// by effect * s * ramp(hour) standard deviations, where the ramp grows from
// 0.3 at admission to 1.0 at hour 48, so later hours are more informative.
// In-hospital mortality is s + 0.05 * noise > 0.45, length of stay grows
// with s, and phenotype flags are Bernoulli in s.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "tscan/dictionary.hpp"
#include "tscan/records.hpp"

namespace tscan {

struct SynthCohort {
  std::vector<StayRecord> stays;
  std::vector<EventRecord> events;
  std::vector<PhenotypeLabels> phenotypes;
  std::vector<double> severity;  // latent score per stay, same order as stays
};

struct SynthSignal {
  double effect;     // drift in standard deviations per unit severity
  int cadence;       // hours between scheduled readings, 0 = admission only
  double coverage;   // probability a scheduled reading is charted
};

namespace synth_detail {

inline const std::map<std::string, SynthSignal>& known_signals() {
  static const std::map<std::string, SynthSignal> table{
      {"Heart Rate", {1.0, 1, 0.9}},
      {"Systolic blood pressure", {-1.0, 1, 0.9}},
      {"Diastolic blood pressure", {-0.8, 1, 0.9}},
      {"Mean blood pressure", {-1.0, 1, 0.9}},
      {"Respiratory rate", {0.9, 1, 0.9}},
      {"Oxygen saturation", {-0.8, 1, 0.9}},
      {"Temperature", {0.3, 4, 0.9}},
      {"Fraction inspired oxygen", {0.8, 4, 0.6}},
      {"Glucose", {0.3, 6, 0.8}},
      {"Anion gap", {0.9, 8, 0.9}},
      {"pH", {-0.9, 8, 0.9}},
      {"Albumin", {-0.5, 12, 0.7}},
      {"Hemoglobin", {-0.4, 12, 0.8}},
      {"Magnesium", {0.0, 12, 0.8}},
      {"Prothrombin time", {0.5, 12, 0.7}},
      {"Troponin-T", {0.5, 24, 0.4}},
      {"Cholesterol", {0.0, 24, 0.3}},
      {"Height", {0.0, 0, 1.0}},
      {"Weight", {0.0, 0, 1.0}},
      {"Capillary refill rate", {1.0, 4, 0.8}},
      {"Glascow coma scale eye opening", {-1.0, 4, 0.9}},
      {"Glascow coma scale motor response", {-1.0, 4, 0.9}},
      {"Glascow coma scale total", {-1.0, 4, 0.9}},
      {"Glascow coma scale verbal response", {-1.0, 4, 0.9}},
  };
  return table;
}

// Variables outside the known table: the first ten continuous ones carry
// alternating +-0.6 drift, the rest are noise.
inline std::vector<SynthSignal> signals_for(const VariableDictionary& dict) {
  std::vector<SynthSignal> out;
  int generic = 0;
  for (const auto& v : dict.variables()) {
    auto it = known_signals().find(v.name);
    if (it != known_signals().end()) {
      out.push_back(it->second);
    } else if (v.kind == VariableKind::kContinuous && generic < 10) {
      out.push_back({generic % 2 == 0 ? 0.6 : -0.6, 8, 0.6});
      ++generic;
    } else {
      out.push_back({0.0, 8, 0.5});
    }
  }
  return out;
}

inline double ramp(double hour) { return 0.3 + 0.7 * std::min(hour / 48.0, 1.0); }

inline std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace synth_detail

inline constexpr double kSynthMortalityThreshold = 0.45;
inline constexpr double kSynthMortalityNoise = 0.05;
// 2150-01-01T00:00:00Z, in the shifted-date convention of de-identified ICU data.
inline constexpr TimePoint kSynthEpoch = 5680281600;

inline SynthCohort synth_cohort(std::uint64_t seed, std::size_t n_patients, const VariableDictionary& dict) {
  if (n_patients == 0) throw std::invalid_argument("synth_cohort: need at least one patient");
  using synth_detail::fixed4;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> los_tail(1.0 / 60.0);
  const auto signals = synth_detail::signals_for(dict);

  SynthCohort c;
  for (std::size_t i = 0; i < n_patients; ++i) {
    const double s = normal(rng);
    const bool dies = s + kSynthMortalityNoise * normal(rng) > kSynthMortalityThreshold;
    const double los_hours = std::min(40.0 + los_tail(rng) + 30.0 * std::max(s, 0.0), 600.0);

    StayRecord st;
    st.subject_id = std::to_string(10000 + i);
    st.hadm_id = std::to_string(20000 + i);
    st.icustay_id = std::to_string(30000 + i);
    st.age_years = std::round((19.0 + 70.0 * unif(rng)) * 10.0) / 10.0;
    st.intime = kSynthEpoch + static_cast<TimePoint>(i) * 3 * 86400 + static_cast<TimePoint>(unif(rng) * 86400.0);
    st.outtime = st.intime + static_cast<TimePoint>(los_hours * 3600.0);
    st.mortality_in_hospital = dies;
    if (dies) {
      st.deathtime = unif(rng) < 0.6 ? st.outtime : st.outtime + static_cast<TimePoint>(3600.0 * (1.0 + 47.0 * unif(rng)));
    }

    PhenotypeLabels pl{st.icustay_id, {}};
    for (std::size_t k = 0; k < phenotype_names().size(); ++k) {
      const double a = -2.0 + 0.4 * static_cast<double>(k % 5);
      const double b = k % 3 == 0 ? 1.5 : 0.3;
      pl.flags.push_back(unif(rng) < synth_detail::sigmoid(a + b * s) ? 1 : 0);
    }

    const std::size_t hours = static_cast<std::size_t>(std::ceil(los_hours));
    const TimePoint span = st.outtime - st.intime;
    std::vector<double> offset(dict.size());
    std::vector<int> phase(dict.size());
    for (std::size_t v = 0; v < dict.size(); ++v) {
      offset[v] = 0.2 * normal(rng);
      phase[v] = signals[v].cadence > 1 ? static_cast<int>(unif(rng) * signals[v].cadence) : 0;
    }
    for (std::size_t h = 0; h < hours; ++h) {
      for (std::size_t v = 0; v < dict.size(); ++v) {
        const auto& sig = signals[v];
        const bool scheduled = sig.cadence == 0 ? h == 0 : static_cast<int>(h % sig.cadence) == phase[v];
        if (!scheduled || unif(rng) >= sig.coverage) continue;
        const TimePoint at = static_cast<TimePoint>(h) * 3600 + static_cast<TimePoint>(unif(rng) * 3599.0);
        const double drift = sig.effect * s * synth_detail::ramp(static_cast<double>(h));
        const double noise = normal(rng);
        if (at >= span) continue;
        const auto& var = dict[v];
        std::string value;
        if (var.kind == VariableKind::kContinuous) {
          const double z = offset[v] + drift + 0.5 * noise;
          const double raw = std::clamp(var.mean + var.stdev * z, var.range_lo, var.range_hi);
          value = fixed4(raw);
          // Rounding can step outside a range bound; pull it back in.
          if (std::stod(value) < var.range_lo || std::stod(value) > var.range_hi) value = fixed4(var.mean);
        } else {
          const int n = static_cast<int>(var.categories.size());
          const int normal_idx = static_cast<int>(*var.category_index(var.normal_category));
          int idx;
          if (n == 2) {
            const double p = synth_detail::sigmoid(2.0 * (drift + offset[v]) - 1.5 + 0.5 * noise);
            idx = unif(rng) < p ? 1 - normal_idx : normal_idx;
          } else {
            idx = normal_idx + static_cast<int>(std::lround((drift + offset[v] + 0.5 * noise) * (n - 1) / 3.0));
          }
          value = var.categories[static_cast<std::size_t>(std::clamp(idx, 0, n - 1))];
        }
        c.events.push_back({st.subject_id, st.hadm_id, st.icustay_id, st.intime + at, var.name, value});
      }
    }
    c.stays.push_back(std::move(st));
    c.phenotypes.push_back(std::move(pl));
    c.severity.push_back(s);
  }
  return c;
}

inline void write_cohort(const std::filesystem::path& dir, const SynthCohort& c) {
  std::filesystem::create_directories(dir);
  write_stays((dir / "stays.csv").string(), c.stays);
  write_events((dir / "events.csv").string(), c.events);
  write_phenotypes((dir / "labels.csv").string(), c.phenotypes);
}

}  // namespace tscan
