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

#include "dpgrad/config.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dpgrad/errors.hpp"
#include "dpgrad/rng.hpp"

namespace dpgrad {
namespace {

constexpr std::array<ConfigKeyInfo, 33> kRegistry{{
    {"task.kind", "string", "gaussian-blobs | two-rings | oracle"},
    {"task.classes", "int", "number of classes"},
    {"task.dim", "int", "input dimension"},
    {"task.train", "int", "training split size"},
    {"task.test", "int", "test split size"},
    {"task.seed", "int", "data generation seed"},
    {"task.separation", "real", "gaussian-blobs: distance between class means"},
    {"task.noise", "real", "two-rings: radial jitter"},
    {"model.kind", "string", "logreg | mlp"},
    {"model.hidden", "int", "mlp hidden width"},
    {"train.epochs", "int", "training epochs"},
    {"train.lr", "real", "SGD learning rate"},
    {"train.batch", "int", "minibatch size"},
    {"privacy.sigma", "real", "noise multiplier (0 disables noise)"},
    {"privacy.clip", "string", "clipping radius: none | median | <radius>"},
    {"privacy.delta", "string", "target delta: auto (1/train size) | <value>"},
    {"privacy.placement", "string", "per-sample | on-sum noise placement"},
    {"compress.kind", "string", "none | topk | low-rank"},
    {"compress.rate", "real", "top-k compression rate (>= 1)"},
    {"compress.rank", "int", "low-rank approximation rank"},
    {"compress.payload_bits", "int", "transmitted value width: 16 | 32 | 64"},
    {"compress.iterations", "int", "power iterations per compress call"},
    {"compress.error_feedback", "bool", "re-inject compression residual"},
    {"denoise.enabled", "bool", "run the denoise pipeline"},
    {"denoise.beta", "real", "momentum decay in [0, 1)"},
    {"denoise.gamma", "real", "residual decay in [0, 1]"},
    {"denoise.tie_break", "string", "velocity | acceleration on equal residuals"},
    {"oracle.dim", "int", "oracle stream dimension"},
    {"oracle.batch", "int", "oracle batch size"},
    {"oracle.spikes", "int", "spike count of the prescribed gradient"},
    {"oracle.spike_mag", "real", "spike magnitude"},
    {"oracle.noise", "real", "per-sample perturbation scale"},
    {"analysis.n", "int", "Monte-Carlo trials per estimate"},
}};

constexpr std::array<ConfigKeyInfo, 4> kGridRegistry{{
    {"grid.sigma", "list", "noise multipliers to sweep"},
    {"grid.rate", "list", "compression rates to sweep"},
    {"grid.denoise", "list", "denoise on/off values to sweep"},
    {"run.seed_count", "int", "independent seeds per grid cell"},
}};

std::vector<ConfigKeyInfo> build_full_registry() {
  std::vector<ConfigKeyInfo> all(kRegistry.begin(), kRegistry.end());
  all.insert(all.end(), kGridRegistry.begin(), kGridRegistry.end());
  return all;
}

bool known_key(const std::string& key) {
  for (const ConfigKeyInfo& info : config_key_registry()) {
    if (info.key == key) return true;
  }
  return false;
}

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  auto begin = s.find_first_not_of(ws);
  if (begin == std::string::npos) return {};
  auto end = s.find_last_not_of(ws);
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::string current;
  std::istringstream stream(value);
  while (std::getline(stream, current, ',')) {
    items.push_back(trim(current));
  }
  return items;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t consumed = 0;
    double v = std::stod(value, &consumed);
    if (consumed != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw InvalidParameter("config: key '" + key + "' expects a real, got '" +
                           value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") {
    return true;
  }
  if (value == "false" || value == "0" || value == "no" || value == "off") {
    return false;
  }
  throw InvalidParameter("config: key '" + key + "' expects a bool, got '" +
                         value + "'");
}

}  // namespace

std::span<const ConfigKeyInfo> config_key_registry() {
  static const std::vector<ConfigKeyInfo> all = build_full_registry();
  return all;
}

ExperimentConfig ExperimentConfig::parse_string(const std::string& text) {
  ExperimentConfig config;
  std::istringstream stream(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidParameter("config: line " + std::to_string(line_no) +
                             " is not of the form 'key = value'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw InvalidParameter("config: line " + std::to_string(line_no) +
                             " has an empty key or value");
    }
    if (!known_key(key)) {
      throw InvalidParameter("config: unknown key '" + key + "'");
    }
    if (!config.entries_.emplace(key, value).second) {
      throw InvalidParameter("config: duplicate key '" + key + "'");
    }
  }
  return config;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_string(buffer.str());
}

bool ExperimentConfig::has(const std::string& key) const {
  return entries_.count(key) != 0;
}

const std::string& ExperimentConfig::get_string(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    throw InvalidParameter("config: missing required key '" + key + "'");
  }
  return it->second;
}

double ExperimentConfig::get_double(const std::string& key) const {
  return parse_double(key, get_string(key));
}

std::int64_t ExperimentConfig::get_int(const std::string& key) const {
  const std::string& value = get_string(key);
  try {
    std::size_t consumed = 0;
    long long v = std::stoll(value, &consumed);
    if (consumed != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw InvalidParameter("config: key '" + key + "' expects an int, got '" +
                           value + "'");
  }
}

bool ExperimentConfig::get_bool(const std::string& key) const {
  return parse_bool(key, get_string(key));
}

double ExperimentConfig::get_double_or(const std::string& key,
                                       double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::int64_t ExperimentConfig::get_int_or(const std::string& key,
                                          std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

bool ExperimentConfig::get_bool_or(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}

std::string ExperimentConfig::get_string_or(const std::string& key,
                                            const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

std::vector<double> ExperimentConfig::get_double_list(
    const std::string& key) const {
  std::vector<double> out;
  for (const std::string& item : split_list(get_string(key))) {
    out.push_back(parse_double(key, item));
  }
  if (out.empty()) {
    throw InvalidParameter("config: key '" + key + "' has an empty list");
  }
  return out;
}

std::vector<bool> ExperimentConfig::get_bool_list(const std::string& key) const {
  std::vector<bool> out;
  for (const std::string& item : split_list(get_string(key))) {
    out.push_back(parse_bool(key, item));
  }
  if (out.empty()) {
    throw InvalidParameter("config: key '" + key + "' has an empty list");
  }
  return out;
}

ExperimentConfig ExperimentConfig::with_override(const std::string& key,
                                                 const std::string& value) const {
  if (!known_key(key)) {
    throw InvalidParameter("config: unknown key '" + key + "'");
  }
  ExperimentConfig copy = *this;
  copy.entries_[key] = value;
  return copy;
}

std::uint64_t ExperimentConfig::hash() const {
  // entries_ is an ordered map, so iteration is already key-sorted.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::string_view text) {
    for (unsigned char c : text) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [key, value] : entries_) {
    mix(key);
    mix("=");
    mix(value);
    mix("\n");
  }
  return h;
}

std::string ExperimentConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(hash()));
  return std::string(buf);
}

}  // namespace dpgrad
