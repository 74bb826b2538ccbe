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

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bcfl::compression {

/// The k surviving coordinates of one client's update for one round.
/// Indices are strictly increasing and below dim.
struct SparseUpdate {
  std::uint32_t round = 0;
  std::uint32_t client_id = 0;
  std::uint32_t dim = 0;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::size_t size() const { return indices.size(); }
  bool operator==(const SparseUpdate&) const = default;
};

/// Keeps the k entries of largest magnitude, lowest index first on ties.
SparseUpdate top_k(std::span<const double> g, std::size_t k);

std::vector<double> densify(const SparseUpdate& u);

/// dense[i] += u[i] for every stored coordinate.
void accumulate(const SparseUpdate& u, std::span<double> dense);

struct EnergyCheck {
  double residual = 0.0;  // ||g - u||^2
  double bound = 0.0;     // (1 - k/d) ||g||^2
  bool holds() const { return residual <= bound; }
};

EnergyCheck compression_energy_check(std::span<const double> g, const SparseUpdate& u);

/// Bits needed to address d coordinates, i.e. ceil(log2 d).
unsigned index_bits(std::size_t d);

/// Bytes per index field on the wire: ceil(index_bits(d) / 8).
std::size_t wire_index_bytes(std::size_t d);

struct Payload {
  double per_entry = 0.0;         // omega = s + ceil(log2 d)/8
  double per_client = 0.0;        // k * omega
  double per_block = 0.0;         // N * k * omega
  double dense_per_client = 0.0;  // d * s, the uncompressed transfer
};

/// Analytic payload sizes; fractional bytes are kept.
Payload payload_bytes(std::size_t k, std::size_t d, double s, std::size_t n_clients = 1);

/// Bytes a client actually transmits: k * omega when sparse, d * s when k == d
/// since a full vector needs no indices.
double transmitted_bytes(std::size_t k, std::size_t d, double s);

/// Rounds stored values to the IEEE-754 width carried on the wire (4 or 8 bytes).
void round_to_wire(SparseUpdate& u, std::size_t value_bytes);

/// Little-endian: round, client_id, dim, k as u32; then k indices of
/// wire_index_bytes(dim) bytes (omitted when k == dim); then k values of
/// value_bytes bytes each.
std::vector<std::uint8_t> encode(const SparseUpdate& u, std::size_t value_bytes);
SparseUpdate decode(std::span<const std::uint8_t> bytes, std::size_t value_bytes);

enum class Kind { kTopK };

struct CompressionSpec {
  Kind kind = Kind::kTopK;
  std::size_t k = 1;
  double gamma = 1.0;

  static CompressionSpec top_k(std::size_t k, std::size_t d);
};

/// Compression operator with a declared energy-retention constant gamma:
/// ||x - C(x)||^2 <= (1 - gamma) ||x||^2.
class Compressor {
 public:
  virtual ~Compressor() = default;
  virtual SparseUpdate compress(std::span<const double> g) const = 0;
  virtual double gamma(std::size_t d) const = 0;
  virtual std::string name() const = 0;
};

class TopKCompressor final : public Compressor {
 public:
  explicit TopKCompressor(std::size_t k) : k_(k) {}
  SparseUpdate compress(std::span<const double> g) const override { return top_k(g, k_); }
  double gamma(std::size_t d) const override {
    return static_cast<double>(k_) / static_cast<double>(d);
  }
  std::string name() const override { return "top_k"; }
  std::size_t k() const { return k_; }

 private:
  std::size_t k_;
};

std::unique_ptr<Compressor> make_compressor(const CompressionSpec& spec);

}  // namespace bcfl::compression
