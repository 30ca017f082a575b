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

// Experiment specification, run manifests and atomically published output
// directories.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "tscan/model.hpp"
#include "tscan/train.hpp"

namespace tscan {

inline constexpr const char* kVersion = "0.1.0";

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// nlohmann::json objects keep keys sorted, so dump() is canonical.
inline std::string config_hash(const nlohmann::json& config) { return hex64(fnv1a(config.dump())); }

inline std::string file_hash(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex64(fnv1a(bytes));
}

struct ExperimentSpec {
  std::string data_dir;
  std::string output_dir;
  ModelConfig model;
  TrainConfig train;
  std::uint64_t split_seed = 0;

  void validate() const {
    if (!std::filesystem::is_directory(data_dir)) throw std::invalid_argument("data dir does not exist: " + data_dir);
    if (output_dir.empty()) throw std::invalid_argument("output dir must be set");
    model.validate();
    train.validate();
  }
};

inline void to_json(nlohmann::json& j, const ExperimentSpec& s) {
  j = {{"data_dir", s.data_dir},
       {"output_dir", s.output_dir},
       {"model", s.model},
       {"train", s.train},
       {"split_seed", s.split_seed}};
}

inline void from_json(const nlohmann::json& j, ExperimentSpec& s) {
  s.data_dir = j.value("data_dir", std::string());
  s.output_dir = j.value("output_dir", std::string());
  if (j.contains("model")) s.model = j.at("model").get<ModelConfig>();
  if (j.contains("train")) s.train = j.at("train").get<TrainConfig>();
  s.split_seed = j.value("split_seed", std::uint64_t{0});
}

// Everything needed to rerun a command: its arguments, a hash of the resolved
// configuration, the seed, library versions and hashes of every output.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;  // relative to the output directory

  nlohmann::json to_json(const std::filesystem::path& dir) const {
    nlohmann::json files = nlohmann::json::array();
    for (const auto& o : outputs) files.push_back({{"path", o}, {"fnv1a", file_hash(dir / o)}});
    return {{"command", command},
            {"args", args},
            {"config", config},
            {"config_hash", config_hash(config)},
            {"seed", seed},
            {"versions",
             {{"tscan", kVersion},
              {"compiler", __VERSION__},
              {"cplusplus", __cplusplus},
              {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
            {"outputs", files}};
  }

  // Checks that every declared output exists and is nonempty, then writes
  // run-manifest.json next to them.
  void write(const std::filesystem::path& dir) const {
    for (const auto& o : outputs) {
      const auto p = dir / o;
      if (!std::filesystem::is_regular_file(p) || std::filesystem::file_size(p) == 0)
        throw std::runtime_error("declared output missing or empty: " + p.string());
    }
    std::ofstream out(dir / "run-manifest.json", std::ios::trunc);
    out << to_json(dir).dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing run manifest");
  }
};

inline bool nonempty_dir(const std::filesystem::path& p) {
  return std::filesystem::is_directory(p) && !std::filesystem::is_empty(p);
}

// Builds outputs in a sibling staging directory and renames it into place on
// commit, so readers never observe a half-written output directory.
class StagedDir {
 public:
  StagedDir(std::filesystem::path target, bool force) : target_(std::move(target)) {
    if (std::filesystem::exists(target_) && !std::filesystem::is_directory(target_))
      throw std::invalid_argument(target_.string() + " exists and is not a directory");
    if (nonempty_dir(target_) && !force)
      throw std::invalid_argument("output directory " + target_.string() + " is not empty (use --force)");
    const auto parent = target_.has_parent_path() ? target_.parent_path() : std::filesystem::path(".");
    std::filesystem::create_directories(parent);
    staging_ = parent / ("." + target_.filename().string() + ".staging");
    std::filesystem::remove_all(staging_);
    std::filesystem::create_directories(staging_);
  }
  ~StagedDir() {
    if (!committed_) {
      std::error_code ec;
      std::filesystem::remove_all(staging_, ec);
    }
  }
  StagedDir(const StagedDir&) = delete;
  StagedDir& operator=(const StagedDir&) = delete;

  const std::filesystem::path& path() const { return staging_; }
  std::filesystem::path operator/(const std::string& p) const { return staging_ / p; }

  void commit() {
    std::filesystem::remove_all(target_);
    std::filesystem::rename(staging_, target_);
    committed_ = true;
  }

 private:
  std::filesystem::path target_;
  std::filesystem::path staging_;
  bool committed_ = false;
};

}  // namespace tscan
