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

// Named parameter storage and the checkpoint file format.
//
// Checkpoint layout:
//   u64 little-endian   header length N
//   N bytes             JSON header {"format": ..., "tensors": {name: {"shape", "offset"}}}
//   payload             little-endian f64 values, tensors back to back
// Offsets are in bytes from the start of the payload.

#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tscan/autodiff.hpp"
#include "tscan/tensor.hpp"

namespace tscan {

inline constexpr const char* kCheckpointFormat = "tscan-params/1";

class ParamStore {
 public:
  using Map = std::map<std::string, Tensor>;

  void add(const std::string& name, Tensor value) {
    if (!values_.emplace(name, std::move(value)).second) {
      throw std::invalid_argument("duplicate parameter name: " + name);
    }
  }

  bool contains(const std::string& name) const { return values_.count(name) != 0; }

  const Tensor& value(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
  }

  // Replaces a parameter value; the shape must not change.
  void set(const std::string& name, Tensor value) {
    auto it = values_.find(name);
    if (it == values_.end()) throw std::out_of_range("unknown parameter: " + name);
    kernels::require_same_shape(it->second, value, "ParamStore::set");
    it->second = std::move(value);
  }

  // In-place access for optimizers; the shape is fixed, only values change.
  std::span<double> mutable_data(const std::string& name) {
    auto it = values_.find(name);
    if (it == values_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second.data();
  }

  std::size_t size() const noexcept { return values_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, v] : values_) n += v.size();
    return n;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : values_) out.push_back(k);
    return out;
  }

  std::vector<std::string> names_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (auto it = values_.lower_bound(prefix); it != values_.end(); ++it) {
      if (it->first.compare(0, prefix.size(), prefix) != 0) break;
      out.push_back(it->first);
    }
    return out;
  }

  Map::const_iterator begin() const { return values_.begin(); }
  Map::const_iterator end() const { return values_.end(); }

  friend bool operator==(const ParamStore& a, const ParamStore& b) { return a.values_ == b.values_; }

  void save(const std::string& path) const {
    nlohmann::ordered_json tensors = nlohmann::ordered_json::object();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : values_) {
      tensors[name] = {{"shape", t.shape()}, {"offset", offset}};
      offset += t.size() * sizeof(double);
    }
    const std::string header =
        nlohmann::ordered_json{{"format", kCheckpointFormat}, {"tensors", tensors}}.dump();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    write_u64(out, header.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& [_, t] : values_)
      for (double v : t.data()) write_f64(out, v);
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
  }

  static ParamStore load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    const std::uint64_t header_len = read_u64(in);
    if (!in || header_len > (1ull << 31)) throw std::runtime_error("corrupt checkpoint header: " + path);
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    const auto meta = nlohmann::json::parse(header);
    if (meta.value("format", "") != kCheckpointFormat) {
      throw std::runtime_error("unsupported checkpoint format in " + path);
    }
    const auto payload_start = in.tellg();
    ParamStore store;
    for (const auto& [name, entry] : meta.at("tensors").items()) {
      Shape shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      in.seekg(payload_start + static_cast<std::streamoff>(offset));
      std::vector<double> data(shape_numel(shape));
      for (double& v : data) v = read_f64(in);
      if (!in) throw std::runtime_error("truncated checkpoint payload for " + name);
      store.add(name, Tensor(std::move(shape), std::move(data)));
    }
    return store;
  }

 private:
  static void write_u64(std::ostream& out, std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(buf, 8);
  }
  static std::uint64_t read_u64(std::istream& in) {
    unsigned char buf[8] = {};
    in.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  static void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }
  static double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

  Map values_;
};

inline Var Tape::param(const ParamStore& store, const std::string& name) {
  if (auto it = bound_.find(name); it != bound_.end()) return Var(this, it->second);
  Var v = leaf(store.value(name));
  bound_.emplace(name, v.id());
  return v;
}

// Glorot-uniform initialisation for a fan_in x fan_out matrix.
inline Tensor glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t({fan_in, fan_out});
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace tscan
