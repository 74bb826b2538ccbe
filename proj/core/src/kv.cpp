// Copyright 2026 The BCFL Simulator Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "bcfl/kv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bcfl/error.hpp"

namespace bcfl {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  require(end != value.c_str() && *end == '\0' && std::isfinite(v), ErrorKind::kConfig,
          "key '" + key + "' expects a number, got '" + value + "'");
  return v;
}

std::uint64_t parse_count(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  require(ec == std::errc() && ptr == value.data() + value.size(), ErrorKind::kConfig,
          "key '" + key + "' expects a non-negative integer, got '" + value + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::stringstream in(text);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::kConfig,
            origin + ":" + std::to_string(n) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    require(!key.empty(), ErrorKind::kConfig, origin + ":" + std::to_string(n) + ": empty key");
    require(kv.count(key) == 0, ErrorKind::kConfig,
            origin + ":" + std::to_string(n) + ": duplicate key '" + key + "'");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::kConfig, "cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_key_values(buffer.str(), path.string());
}

std::string KeyValueReader::text(const std::string& key, const std::string& fallback) {
  used_.insert(key);
  const auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

double KeyValueReader::real(const std::string& key, double fallback) {
  used_.insert(key);
  const auto it = kv_.find(key);
  return it == kv_.end() ? fallback : parse_real(key, it->second);
}

std::uint64_t KeyValueReader::count(const std::string& key, std::uint64_t fallback) {
  used_.insert(key);
  const auto it = kv_.find(key);
  return it == kv_.end() ? fallback : parse_count(key, it->second);
}

std::optional<double> KeyValueReader::real_or_auto(const std::string& key,
                                                  std::optional<double> fallback) {
  used_.insert(key);
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  if (it->second == "auto") return std::nullopt;
  return parse_real(key, it->second);
}

bool KeyValueReader::flag(const std::string& key, bool fallback) {
  used_.insert(key);
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  fail(ErrorKind::kConfig, "key '" + key + "' expects true or false, got '" + it->second + "'");
}

std::vector<double> KeyValueReader::reals(const std::string& key,
                                          const std::vector<double>& fallback) {
  used_.insert(key);
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(it->second)) out.push_back(parse_real(key, item));
  return out;
}

std::vector<std::size_t> KeyValueReader::counts(const std::string& key,
                                                const std::vector<std::size_t>& fallback) {
  used_.insert(key);
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::vector<std::size_t> out;
  for (const auto& item : split_list(it->second)) out.push_back(parse_count(key, item));
  return out;
}

void KeyValueReader::reject_unknown() const {
  for (const auto& [key, value] : kv_) {
    require(used_.count(key) != 0, ErrorKind::kConfig, "unknown config key '" + key + "'");
  }
}

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace bcfl
