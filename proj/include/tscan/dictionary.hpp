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

// Clinical variable dictionary: ordering, one-hot layout, normalization
// statistics and plausibility ranges.

#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace tscan {

enum class VariableKind { kContinuous, kCategorical };

struct Variable {
  std::string name;
  VariableKind kind = VariableKind::kContinuous;
  std::vector<std::string> categories;  // categorical only, in one-hot order
  double normal_value = 0.0;            // continuous imputation default
  std::string normal_category;          // categorical imputation default
  double range_lo = -INFINITY;
  double range_hi = INFINITY;
  double mean = 0.0;  // z-normalization statistics
  double stdev = 1.0;

  std::size_t width() const { return kind == VariableKind::kContinuous ? 1 : categories.size(); }

  std::optional<std::size_t> category_index(const std::string& token) const {
    for (std::size_t i = 0; i < categories.size(); ++i)
      if (categories[i] == token) return i;
    return std::nullopt;
  }
};

class VariableDictionary {
 public:
  VariableDictionary() = default;
  explicit VariableDictionary(std::vector<Variable> vars) : vars_(std::move(vars)) { rebuild(); }

  std::size_t size() const { return vars_.size(); }
  // One-hot width d.
  std::size_t width() const { return offsets_.empty() ? 0 : offsets_.back() + vars_.back().width(); }
  const std::vector<Variable>& variables() const { return vars_; }
  const Variable& operator[](std::size_t i) const { return vars_.at(i); }
  std::size_t offset(std::size_t i) const { return offsets_.at(i); }

  std::optional<std::size_t> find(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Column label for each of the d one-hot columns.
  std::vector<std::string> column_names() const {
    std::vector<std::string> out;
    for (const auto& v : vars_) {
      if (v.kind == VariableKind::kContinuous) {
        out.push_back(v.name);
      } else {
        for (const auto& c : v.categories) out.push_back(v.name + "=" + c);
      }
    }
    return out;
  }

  // Variable index owning each one-hot column.
  std::vector<std::size_t> column_owner() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < vars_.size(); ++i) out.insert(out.end(), vars_[i].width(), i);
    return out;
  }

  std::size_t continuous_count() const {
    std::size_t n = 0;
    for (const auto& v : vars_) n += v.kind == VariableKind::kContinuous;
    return n;
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& v : vars_) {
      nlohmann::json j{{"name", v.name}};
      if (v.kind == VariableKind::kContinuous) {
        j["kind"] = "continuous";
        j["normal_value"] = v.normal_value;
        j["range"] = {v.range_lo, v.range_hi};
        j["mean"] = v.mean;
        j["std"] = v.stdev;
      } else {
        j["kind"] = "categorical";
        j["categories"] = v.categories;
        j["normal_value"] = v.normal_category;
      }
      arr.push_back(std::move(j));
    }
    return {{"variables", arr}};
  }

  static VariableDictionary from_json(const nlohmann::json& j) {
    std::vector<Variable> vars;
    const auto& arr = j.at("variables");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto& e = arr[i];
      const std::string where = "dictionary entry " + std::to_string(i);
      Variable v;
      try {
        v.name = e.at("name").get<std::string>();
        const auto kind = e.at("kind").get<std::string>();
        if (kind == "continuous") {
          v.kind = VariableKind::kContinuous;
          v.normal_value = e.at("normal_value").get<double>();
          const auto& r = e.at("range");
          v.range_lo = r.at(0).get<double>();
          v.range_hi = r.at(1).get<double>();
          v.mean = e.value("mean", v.normal_value);
          v.stdev = e.value("std", (v.range_hi - v.range_lo) / 4.0);
        } else if (kind == "categorical") {
          v.kind = VariableKind::kCategorical;
          v.categories = e.at("categories").get<std::vector<std::string>>();
          v.normal_category = e.at("normal_value").get<std::string>();
        } else {
          throw std::invalid_argument("unknown kind '" + kind + "'");
        }
      } catch (const nlohmann::json::exception& ex) {
        throw std::invalid_argument(where + ": " + ex.what());
      } catch (const std::invalid_argument& ex) {
        throw std::invalid_argument(where + ": " + ex.what());
      }
      vars.push_back(std::move(v));
    }
    return VariableDictionary(std::move(vars));
  }

  static VariableDictionary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dictionary " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& ex) {
      throw std::invalid_argument(path + ": " + ex.what());
    }
    return from_json(j);
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    out << to_json().dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path);
  }

 private:
  void rebuild() {
    offsets_.clear();
    index_.clear();
    std::size_t off = 0;
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      const auto& v = vars_[i];
      if (v.name.empty()) throw std::invalid_argument("variable name must be nonempty");
      if (v.name.find_first_of(",\"\n=") != std::string::npos)
        throw std::invalid_argument("variable name '" + v.name + "' contains a reserved character");
      if (!index_.emplace(v.name, i).second) throw std::invalid_argument("duplicate variable '" + v.name + "'");
      if (v.kind == VariableKind::kContinuous) {
        if (!(v.range_lo < v.range_hi)) throw std::invalid_argument(v.name + ": empty plausible range");
        if (!(v.stdev > 0.0) || !std::isfinite(v.stdev) || !std::isfinite(v.mean))
          throw std::invalid_argument(v.name + ": normalization statistics must be finite with std > 0");
      } else {
        if (v.categories.empty()) throw std::invalid_argument(v.name + ": no categories");
        std::map<std::string, int> seen;
        for (const auto& c : v.categories) {
          if (c.find_first_of(",\"\n") != std::string::npos || ++seen[c] > 1)
            throw std::invalid_argument(v.name + ": bad or duplicate category '" + c + "'");
        }
        if (!v.category_index(v.normal_category))
          throw std::invalid_argument(v.name + ": normal value '" + v.normal_category + "' is not a category");
      }
      offsets_.push_back(off);
      off += v.width();
    }
  }

  std::vector<Variable> vars_;
  std::vector<std::size_t> offsets_;
  std::map<std::string, std::size_t> index_;
};

namespace dictionary_detail {

inline Variable continuous(std::string name, double normal, double lo, double hi, double mean, double sd) {
  Variable v;
  v.name = std::move(name);
  v.kind = VariableKind::kContinuous;
  v.normal_value = normal;
  v.range_lo = lo;
  v.range_hi = hi;
  v.mean = mean;
  v.stdev = sd;
  return v;
}

inline Variable categorical(std::string name, int first, int last, int normal) {
  Variable v;
  v.name = std::move(name);
  v.kind = VariableKind::kCategorical;
  for (int c = first; c <= last; ++c) v.categories.push_back(std::to_string(c));
  v.normal_category = std::to_string(normal);
  return v;
}

}  // namespace dictionary_detail

// The 24-variable clinical set: 19 continuous, 5 categorical, d = 49.
inline VariableDictionary default_dictionary() {
  using dictionary_detail::categorical;
  using dictionary_detail::continuous;
  return VariableDictionary({
      continuous("Albumin", 3.5, 0.5, 7.0, 3.0, 0.7),
      continuous("Anion gap", 12.0, 0.0, 50.0, 13.5, 4.0),
      categorical("Capillary refill rate", 0, 1, 0),
      continuous("Cholesterol", 180.0, 40.0, 600.0, 160.0, 45.0),
      continuous("Diastolic blood pressure", 59.0, 0.0, 300.0, 60.0, 14.0),
      continuous("Fraction inspired oxygen", 0.21, 0.2, 1.0, 0.5, 0.2),
      categorical("Glascow coma scale eye opening", 1, 4, 4),
      categorical("Glascow coma scale motor response", 1, 6, 6),
      categorical("Glascow coma scale total", 3, 15, 15),
      categorical("Glascow coma scale verbal response", 1, 5, 5),
      continuous("Glucose", 128.0, 10.0, 1500.0, 140.0, 50.0),
      continuous("Heart Rate", 86.0, 0.0, 300.0, 87.0, 18.0),
      continuous("Height", 170.0, 50.0, 250.0, 169.0, 11.0),
      continuous("Hemoglobin", 12.0, 2.0, 25.0, 10.5, 2.0),
      continuous("Magnesium", 2.0, 0.2, 10.0, 2.0, 0.4),
      continuous("Mean blood pressure", 77.0, 0.0, 300.0, 78.0, 15.0),
      continuous("Oxygen saturation", 98.0, 0.0, 100.0, 97.0, 3.5),
      continuous("Prothrombin time", 13.0, 5.0, 150.0, 15.5, 6.0),
      continuous("Respiratory rate", 19.0, 0.0, 100.0, 19.5, 5.5),
      continuous("Systolic blood pressure", 118.0, 0.0, 375.0, 120.0, 22.0),
      continuous("Temperature", 36.6, 25.0, 45.0, 36.9, 0.8),
      continuous("Troponin-T", 0.01, 0.0, 30.0, 0.3, 1.0),
      continuous("Weight", 81.0, 20.0, 400.0, 82.0, 22.0),
      continuous("pH", 7.4, 6.5, 8.0, 7.38, 0.08),
  });
}

// Wide dictionary with the same layout as the 155-variable cohort (150
// continuous, 5 categorical). Used for shape checks when the curated file is
// not supplied.
inline VariableDictionary wide_placeholder_dictionary(std::size_t continuous = 150) {
  std::vector<Variable> vars;
  for (std::size_t i = 0; i < continuous; ++i) {
    vars.push_back(dictionary_detail::continuous("var" + std::to_string(i), 0.0, -10.0, 10.0, 0.0, 1.0));
  }
  vars.push_back(dictionary_detail::categorical("Capillary refill rate", 0, 1, 0));
  vars.push_back(dictionary_detail::categorical("Glascow coma scale eye opening", 1, 4, 4));
  vars.push_back(dictionary_detail::categorical("Glascow coma scale motor response", 1, 6, 6));
  vars.push_back(dictionary_detail::categorical("Glascow coma scale total", 3, 15, 15));
  vars.push_back(dictionary_detail::categorical("Glascow coma scale verbal response", 1, 5, 5));
  return VariableDictionary(std::move(vars));
}

}  // namespace tscan
