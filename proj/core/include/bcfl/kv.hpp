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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace bcfl {

/// Flat key=value text. '#' starts a comment; blank lines are ignored.
std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin = "<text>");
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

/// Typed reads over a parsed map that remember which keys were used, so
/// unknown keys can be rejected.
class KeyValueReader {
 public:
  explicit KeyValueReader(const std::map<std::string, std::string>& kv) : kv_(kv) {}

  bool has(const std::string& key) const { return kv_.count(key) != 0; }
  std::string text(const std::string& key, const std::string& fallback);
  double real(const std::string& key, double fallback);
  std::uint64_t count(const std::string& key, std::uint64_t fallback);
  /// The literal value "auto" reads as an empty optional.
  std::optional<double> real_or_auto(const std::string& key, std::optional<double> fallback);
  bool flag(const std::string& key, bool fallback);
  std::vector<double> reals(const std::string& key, const std::vector<double>& fallback);
  std::vector<std::size_t> counts(const std::string& key, const std::vector<std::size_t>& fallback);

  /// Throws a config error naming the first key that was never read.
  void reject_unknown() const;

 private:
  const std::map<std::string, std::string>& kv_;
  std::set<std::string> used_;
};

/// Shortest decimal text that round-trips to the same double.
std::string format_real(double v);

}  // namespace bcfl
