// Copyright 2026 The dpgrad-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPGRAD_CONFIG_HPP_
#define DPGRAD_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dpgrad {

/// One recognized experiment key with a help line for --help output.
struct ConfigKeyInfo {
  std::string_view key;
  std::string_view type;  // "int", "real", "bool", "string", "list", ...
  std::string_view help;
};

/// All keys the experiment-config parser accepts.
std::span<const ConfigKeyInfo> config_key_registry();

/// Flat `key = value` experiment configuration with `#` comments. Keys are
/// namespaced (privacy.sigma, compress.kind, ...); unknown or duplicate keys
/// are rejected at parse time. The content hash is stable across key order
/// and incidental whitespace.
class ExperimentConfig {
 public:
  static ExperimentConfig parse_string(const std::string& text);
  static ExperimentConfig parse_file(const std::string& path);

  bool has(const std::string& key) const;

  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_string(const std::string& key) const;

  double get_double_or(const std::string& key, double fallback) const;
  std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const;
  bool get_bool_or(const std::string& key, bool fallback) const;
  std::string get_string_or(const std::string& key,
                            const std::string& fallback) const;

  /// Comma-separated list accessors.
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<bool> get_bool_list(const std::string& key) const;

  /// Copy of this config with one key replaced (or added). The key must be
  /// registered.
  ExperimentConfig with_override(const std::string& key,
                                 const std::string& value) const;

  /// Stable content digest over the sorted canonical entries.
  std::uint64_t hash() const;
  std::string hash_hex() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace dpgrad

#endif  // DPGRAD_CONFIG_HPP_
