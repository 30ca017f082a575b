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

// Raw clinical records (ICU stays, charted events, phenotype labels), UTC
// timestamps and the minimal CSV dialect used for every tabular file.

#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tscan {

// Seconds since the Unix epoch, UTC.
using TimePoint = std::int64_t;

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}
}  // namespace detail

// Accepts "YYYY-MM-DDTHH:MM:SS[Z]" and "YYYY-MM-DD HH:MM:SS".
inline std::optional<TimePoint> parse_time(std::string_view s) {
  if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
  if (s.size() != 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':') {
    return std::nullopt;
  }
  int y, mo, d, h, mi, se;
  if (!detail::parse_int(s.substr(0, 4), y) || !detail::parse_int(s.substr(5, 2), mo) ||
      !detail::parse_int(s.substr(8, 2), d) || !detail::parse_int(s.substr(11, 2), h) ||
      !detail::parse_int(s.substr(14, 2), mi) || !detail::parse_int(s.substr(17, 2), se)) {
    return std::nullopt;
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || se > 59 || h < 0 || mi < 0 || se < 0) return std::nullopt;
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<TimePoint>(days) * 86400 + h * 3600 + mi * 60 + se;
}

inline std::string format_time(TimePoint t) {
  using namespace std::chrono;
  const auto day_count = static_cast<long>(t >= 0 ? t / 86400 : (t - 86399) / 86400);
  const TimePoint rem = t - static_cast<TimePoint>(day_count) * 86400;
  const year_month_day ymd{sys_days{days{day_count}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(rem / 3600), static_cast<int>(rem % 3600 / 60), static_cast<int>(rem % 60));
  return buf;
}

// Orders numeric identifiers numerically and everything else lexically.
inline bool id_less(const std::string& a, const std::string& b) {
  auto digits = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (digits(a) && digits(b) && a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace csv {

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += escape(fields[i]);
  }
  return out;
}

// Fixed-precision rendering shared by every writer so outputs are byte-stable.
inline std::string num(double v, int precision = 17) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

class Table {
 public:
  static Table read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    Table t;
    t.path_ = path;
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": missing header");
    t.header_ = split_line(line);
    for (std::size_t i = 0; i < t.header_.size(); ++i) t.index_[t.header_[i]] = i;
    while (std::getline(in, line)) {
      if (line.empty() || line == "\r") continue;
      auto fields = split_line(line);
      if (fields.size() != t.header_.size()) {
        throw ParseError(path + ": row " + std::to_string(t.rows_.size() + 1) + " has " +
                         std::to_string(fields.size()) + " fields, expected " +
                         std::to_string(t.header_.size()));
      }
      t.rows_.push_back(std::move(fields));
    }
    return t;
  }

  std::size_t column(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ParseError(path_ + ": missing column '" + name + "'");
    return it->second;
  }
  bool has_column(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::vector<std::string> header_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> rows_;
};

class Writer {
 public:
  explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::trunc | std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write " + path);
  }
  void row(const std::vector<std::string>& fields) { out_ << join(fields) << '\n'; }
  void close() {
    out_.close();
    if (!out_) throw std::runtime_error("failed writing " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace csv

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct StayRecord {
  std::string subject_id;
  std::string hadm_id;
  std::string icustay_id;
  double age_years = 0.0;
  TimePoint intime = 0;
  TimePoint outtime = 0;
  int transfers = 0;
  bool mortality_in_hospital = false;
  std::optional<TimePoint> deathtime;

  double los_hours() const { return static_cast<double>(outtime - intime) / 3600.0; }

  friend bool operator==(const StayRecord&, const StayRecord&) = default;
};

struct EventRecord {
  std::string subject_id;
  std::optional<std::string> hadm_id;
  std::optional<std::string> icustay_id;
  TimePoint charttime = 0;
  std::string variable;
  std::string value;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

// Phenotype flags for one ICU stay, in the order of phenotype_names().
struct PhenotypeLabels {
  std::string icustay_id;
  std::vector<int> flags;
};

inline const std::vector<std::string>& phenotype_names() {
  static const std::vector<std::string> names{
      "Acute and unspecified renal failure",
      "Acute cerebrovascular disease",
      "Acute myocardial infarction",
      "Cardiac dysrhythmias",
      "Chronic kidney disease",
      "Chronic obstructive pulmonary disease",
      "Complications of surgical/medical care",
      "Conduction disorders",
      "Congestive heart failure; nonhypertensive",
      "Coronary atherosclerosis and related",
      "Diabetes mellitus with complications",
      "Diabetes mellitus without complication",
      "Disorders of lipid metabolism",
      "Essential hypertension",
      "Fluid and electrolyte disorders",
      "Gastrointestinal hemorrhage",
      "Hypertension with complications",
      "Other liver diseases",
      "Other lower respiratory disease",
      "Other upper respiratory disease",
      "Pleurisy; pneumothorax; pulmonary collapse",
      "Pneumonia",
      "Respiratory failure; insufficiency; arrest",
      "Septicemia (except in labor)",
      "Shock"};
  return names;
}

namespace detail {

inline std::optional<std::string> opt_field(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return s;
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(what + ": not a number: '" + s + "'");
  }
}

inline TimePoint require_time(const std::string& s, const std::string& what) {
  auto t = parse_time(s);
  if (!t) throw ParseError(what + ": malformed timestamp '" + s + "'");
  return *t;
}

inline bool parse_flag(const std::string& s, const std::string& what) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false" || s.empty()) return false;
  throw ParseError(what + ": expected 0/1 flag, got '" + s + "'");
}

}  // namespace detail

// stays.csv: subject_id,hadm_id,icustay_id,age,intime,outtime,transfers,mortality,deathtime
inline std::vector<StayRecord> read_stays(const std::string& path) {
  const auto table = csv::Table::read(path);
  const std::size_t c_sub = table.column("subject_id"), c_hadm = table.column("hadm_id"),
                    c_icu = table.column("icustay_id"), c_age = table.column("age"),
                    c_in = table.column("intime"), c_out = table.column("outtime"),
                    c_tr = table.column("transfers"), c_mort = table.column("mortality"),
                    c_death = table.column("deathtime");
  std::vector<StayRecord> out;
  for (std::size_t r = 0; r < table.rows().size(); ++r) {
    const auto& row = table.rows()[r];
    const std::string where = path + " row " + std::to_string(r + 1);
    StayRecord s;
    s.subject_id = row[c_sub];
    s.hadm_id = row[c_hadm];
    s.icustay_id = row[c_icu];
    s.age_years = detail::parse_double(row[c_age], where + " age");
    s.intime = detail::require_time(row[c_in], where + " intime");
    s.outtime = detail::require_time(row[c_out], where + " outtime");
    s.transfers = static_cast<int>(detail::parse_double(row[c_tr], where + " transfers"));
    s.mortality_in_hospital = detail::parse_flag(row[c_mort], where + " mortality");
    if (!row[c_death].empty()) s.deathtime = detail::require_time(row[c_death], where + " deathtime");
    if (s.outtime < s.intime) throw ParseError(where + ": outtime precedes intime");
    if (s.deathtime.has_value() != s.mortality_in_hospital) {
      throw ParseError(where + ": deathtime must be present exactly when mortality is set");
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline void write_stays(const std::string& path, const std::vector<StayRecord>& stays) {
  csv::Writer w(path);
  w.row({"subject_id", "hadm_id", "icustay_id", "age", "intime", "outtime", "transfers", "mortality",
         "deathtime"});
  for (const auto& s : stays) {
    w.row({s.subject_id, s.hadm_id, s.icustay_id, csv::num(s.age_years, 6), format_time(s.intime),
           format_time(s.outtime), std::to_string(s.transfers), s.mortality_in_hospital ? "1" : "0",
           s.deathtime ? format_time(*s.deathtime) : ""});
  }
  w.close();
}

// events.csv: subject_id,hadm_id,icustay_id,charttime,variable,value
inline std::vector<EventRecord> read_events(const std::string& path) {
  const auto table = csv::Table::read(path);
  const std::size_t c_sub = table.column("subject_id"), c_hadm = table.column("hadm_id"),
                    c_icu = table.column("icustay_id"), c_time = table.column("charttime"),
                    c_var = table.column("variable"), c_val = table.column("value");
  std::vector<EventRecord> out;
  out.reserve(table.rows().size());
  for (std::size_t r = 0; r < table.rows().size(); ++r) {
    const auto& row = table.rows()[r];
    EventRecord e;
    e.subject_id = row[c_sub];
    e.hadm_id = detail::opt_field(row[c_hadm]);
    e.icustay_id = detail::opt_field(row[c_icu]);
    e.charttime = detail::require_time(row[c_time], path + " row " + std::to_string(r + 1) + " charttime");
    e.variable = row[c_var];
    e.value = row[c_val];
    out.push_back(std::move(e));
  }
  return out;
}

inline void write_events(const std::string& path, const std::vector<EventRecord>& events) {
  csv::Writer w(path);
  w.row({"subject_id", "hadm_id", "icustay_id", "charttime", "variable", "value"});
  for (const auto& e : events) {
    w.row({e.subject_id, e.hadm_id.value_or(""), e.icustay_id.value_or(""), format_time(e.charttime),
           e.variable, e.value});
  }
  w.close();
}

// labels.csv: icustay_id followed by one 0/1 column per phenotype.
inline std::vector<PhenotypeLabels> read_phenotypes(const std::string& path) {
  const auto table = csv::Table::read(path);
  const std::size_t c_icu = table.column("icustay_id");
  std::vector<std::size_t> cols;
  for (const auto& name : phenotype_names()) cols.push_back(table.column(name));
  std::vector<PhenotypeLabels> out;
  for (std::size_t r = 0; r < table.rows().size(); ++r) {
    const auto& row = table.rows()[r];
    PhenotypeLabels l{row[c_icu], {}};
    for (std::size_t c : cols)
      l.flags.push_back(detail::parse_flag(row[c], path + " row " + std::to_string(r + 1)) ? 1 : 0);
    out.push_back(std::move(l));
  }
  return out;
}

inline void write_phenotypes(const std::string& path, const std::vector<PhenotypeLabels>& labels) {
  csv::Writer w(path);
  std::vector<std::string> header{"icustay_id"};
  header.insert(header.end(), phenotype_names().begin(), phenotype_names().end());
  w.row(header);
  for (const auto& l : labels) {
    std::vector<std::string> row{l.icustay_id};
    for (int f : l.flags) row.push_back(f ? "1" : "0");
    w.row(row);
  }
  w.close();
}

}  // namespace tscan
