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

#include "bcfl/compression.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

#include "bcfl/error.hpp"

namespace bcfl::compression {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_uint(std::vector<std::uint8_t>& out, std::uint64_t v, std::size_t bytes) {
  for (std::size_t i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_uint(std::span<const std::uint8_t> in, std::size_t& pos, std::size_t bytes) {
  require(pos + bytes <= in.size(), ErrorKind::kIntegrity, "sparse update truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
  pos += bytes;
  return v;
}

void check_value_bytes(std::size_t value_bytes) {
  require(value_bytes == 4 || value_bytes == 8, ErrorKind::kParameter,
          "wire values must be 4 or 8 bytes, got " + std::to_string(value_bytes));
}

}  // namespace

SparseUpdate top_k(std::span<const double> g, std::size_t k) {
  const std::size_t d = g.size();
  require(k >= 1 && k <= d, ErrorKind::kParameter,
          "top_k needs 1 <= k <= d, got k=" + std::to_string(k) + " d=" + std::to_string(d));
  require(d <= UINT32_MAX, ErrorKind::kParameter, "dimension exceeds 32-bit indexing");

  SparseUpdate out;
  out.dim = static_cast<std::uint32_t>(d);
  std::vector<std::uint32_t> order(d);
  std::iota(order.begin(), order.end(), 0u);
  if (k < d) {
    // Total order: larger magnitude first, then lower index.
    auto before = [&](std::uint32_t a, std::uint32_t b) {
      const double ma = std::abs(g[a]);
      const double mb = std::abs(g[b]);
      return ma > mb || (ma == mb && a < b);
    };
    std::nth_element(order.begin(), order.begin() + static_cast<long>(k) - 1, order.end(), before);
    order.resize(k);
    std::sort(order.begin(), order.end());
  }
  out.indices = std::move(order);
  out.values.reserve(k);
  for (auto i : out.indices) out.values.push_back(g[i]);
  return out;
}

std::vector<double> densify(const SparseUpdate& u) {
  std::vector<double> dense(u.dim, 0.0);
  accumulate(u, dense);
  return dense;
}

void accumulate(const SparseUpdate& u, std::span<double> dense) {
  require(dense.size() == u.dim, ErrorKind::kParameter, "dense target has the wrong dimension");
  for (std::size_t j = 0; j < u.size(); ++j) dense[u.indices[j]] += u.values[j];
}

EnergyCheck compression_energy_check(std::span<const double> g, const SparseUpdate& u) {
  require(g.size() == u.dim, ErrorKind::kParameter, "energy check: dimension mismatch");
  const auto dense = densify(u);
  EnergyCheck check;
  double norm = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = g[i] - dense[i];
    check.residual += r * r;
    norm += g[i] * g[i];
  }
  const double gamma = static_cast<double>(u.size()) / static_cast<double>(u.dim);
  check.bound = (1.0 - gamma) * norm;
  return check;
}

unsigned index_bits(std::size_t d) {
  require(d >= 1, ErrorKind::kParameter, "dimension must be positive");
  return d == 1 ? 0u : static_cast<unsigned>(std::bit_width(d - 1));
}

std::size_t wire_index_bytes(std::size_t d) { return (index_bits(d) + 7) / 8; }

Payload payload_bytes(std::size_t k, std::size_t d, double s, std::size_t n_clients) {
  require(k <= d, ErrorKind::kParameter, "payload: k exceeds d");
  require(s > 0.0, ErrorKind::kParameter, "payload: value width must be positive");
  Payload p;
  p.per_entry = s + static_cast<double>(index_bits(d)) / 8.0;
  p.per_client = static_cast<double>(k) * p.per_entry;
  p.per_block = static_cast<double>(n_clients) * p.per_client;
  p.dense_per_client = static_cast<double>(d) * s;
  return p;
}

double transmitted_bytes(std::size_t k, std::size_t d, double s) {
  const auto p = payload_bytes(k, d, s);
  return k == d ? p.dense_per_client : p.per_client;
}

void round_to_wire(SparseUpdate& u, std::size_t value_bytes) {
  check_value_bytes(value_bytes);
  if (value_bytes == 4) {
    for (double& v : u.values) v = static_cast<double>(static_cast<float>(v));
  }
}

std::vector<std::uint8_t> encode(const SparseUpdate& u, std::size_t value_bytes) {
  check_value_bytes(value_bytes);
  require(u.indices.size() == u.values.size(), ErrorKind::kParameter,
          "sparse update has mismatched index/value counts");
  const std::size_t k = u.size();
  const bool dense = k == u.dim;
  const std::size_t ib = wire_index_bytes(u.dim);

  std::vector<std::uint8_t> out;
  out.reserve(16 + k * ((dense ? 0 : ib) + value_bytes));
  put_u32(out, u.round);
  put_u32(out, u.client_id);
  put_u32(out, u.dim);
  put_u32(out, static_cast<std::uint32_t>(k));
  if (!dense) {
    for (auto i : u.indices) put_uint(out, i, ib);
  }
  for (double v : u.values) {
    if (value_bytes == 4) {
      put_uint(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
    } else {
      put_uint(out, std::bit_cast<std::uint64_t>(v), 8);
    }
  }
  return out;
}

SparseUpdate decode(std::span<const std::uint8_t> bytes, std::size_t value_bytes) {
  check_value_bytes(value_bytes);
  std::size_t pos = 0;
  SparseUpdate u;
  u.round = static_cast<std::uint32_t>(get_uint(bytes, pos, 4));
  u.client_id = static_cast<std::uint32_t>(get_uint(bytes, pos, 4));
  u.dim = static_cast<std::uint32_t>(get_uint(bytes, pos, 4));
  const auto k = static_cast<std::size_t>(get_uint(bytes, pos, 4));
  require(u.dim >= 1 && k <= u.dim, ErrorKind::kIntegrity, "sparse update header is inconsistent");
  const bool dense = k == u.dim;
  const std::size_t ib = wire_index_bytes(u.dim);
  const std::size_t expected = 16 + k * ((dense ? 0 : ib) + value_bytes);
  require(bytes.size() == expected, ErrorKind::kIntegrity,
          "sparse update has " + std::to_string(bytes.size()) + " bytes, header implies " +
              std::to_string(expected));

  u.indices.resize(k);
  if (dense) {
    std::iota(u.indices.begin(), u.indices.end(), 0u);
  } else {
    for (std::size_t j = 0; j < k; ++j) {
      u.indices[j] = static_cast<std::uint32_t>(get_uint(bytes, pos, ib));
      require(u.indices[j] < u.dim, ErrorKind::kIntegrity, "sparse index out of range");
      require(j == 0 || u.indices[j] > u.indices[j - 1], ErrorKind::kIntegrity,
              "sparse indices not strictly increasing");
    }
  }
  u.values.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    if (value_bytes == 4) {
      u.values[j] = static_cast<double>(
          std::bit_cast<float>(static_cast<std::uint32_t>(get_uint(bytes, pos, 4))));
    } else {
      u.values[j] = std::bit_cast<double>(get_uint(bytes, pos, 8));
    }
  }
  return u;
}

CompressionSpec CompressionSpec::top_k(std::size_t k, std::size_t d) {
  require(k >= 1 && k <= d, ErrorKind::kParameter, "compression spec needs 1 <= k <= d");
  return {Kind::kTopK, k, static_cast<double>(k) / static_cast<double>(d)};
}

std::unique_ptr<Compressor> make_compressor(const CompressionSpec& spec) {
  switch (spec.kind) {
    case Kind::kTopK:
      return std::make_unique<TopKCompressor>(spec.k);
  }
  fail(ErrorKind::kParameter, "unknown compression kind");
}

}  // namespace bcfl::compression
