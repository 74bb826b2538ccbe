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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "bcfl/compression.hpp"
#include "bcfl/error.hpp"
#include "bcfl/random.hpp"

namespace bcfl::compression {
namespace {

std::vector<double> gaussian(std::size_t d, Rng& rng) {
  std::vector<double> g(d);
  for (double& x : g) x = rng.normal();
  return g;
}

TEST(TopK, KeepsLargestMagnitudes) {
  const std::vector<double> g = {0.5, -2.0, 0.1, 1.0};
  const auto u = top_k(g, 2);
  EXPECT_EQ(u.indices, (std::vector<std::uint32_t>{1, 3}));
  EXPECT_EQ(u.values, (std::vector<double>{-2.0, 1.0}));
  EXPECT_EQ(u.dim, 4u);
}

TEST(TopK, TiesGoToLowerIndex) {
  const std::vector<double> g = {1.0, -1.0, 1.0, 0.0};
  const auto u = top_k(g, 2);
  EXPECT_EQ(u.indices, (std::vector<std::uint32_t>{0, 1}));
  EXPECT_EQ(u.values, (std::vector<double>{1.0, -1.0}));
}

// Brute force: an index survives iff fewer than k entries precede it in the
// (magnitude desc, index asc) order.
TEST(TopK, MatchesRankOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 1 + rng.index(40);
    const std::size_t k = 1 + rng.index(d);
    std::vector<double> g(d);
    for (double& x : g) x = static_cast<double>(static_cast<int>(rng.index(7)) - 3);
    std::vector<std::uint32_t> expected;
    for (std::size_t i = 0; i < d; ++i) {
      std::size_t ahead = 0;
      for (std::size_t j = 0; j < d; ++j) {
        const bool before = std::abs(g[j]) > std::abs(g[i]) ||
                            (std::abs(g[j]) == std::abs(g[i]) && j < i);
        if (before) ++ahead;
      }
      if (ahead < k) expected.push_back(static_cast<std::uint32_t>(i));
    }
    EXPECT_EQ(top_k(g, k).indices, expected);
  }
}

TEST(TopK, FullKIsIdentity) {
  Rng rng(3);
  const auto g = gaussian(57, rng);
  const auto u = top_k(g, g.size());
  EXPECT_EQ(densify(u), g);
}

TEST(TopK, RejectsOutOfRangeK) {
  const std::vector<double> g = {1.0, 2.0};
  EXPECT_THROW(top_k(g, 0), Error);
  EXPECT_THROW(top_k(g, 3), Error);
}

TEST(Energy, AllEnergyCaptured) {
  const std::vector<double> g = {3, 0, 0, 0};
  const auto c = compression_energy_check(g, top_k(g, 1));
  EXPECT_EQ(c.residual, 0.0);
  EXPECT_DOUBLE_EQ(c.bound, 0.75 * 9.0);
  EXPECT_TRUE(c.holds());
}

TEST(Energy, EqualityAtUniformMagnitudes) {
  const std::vector<double> g = {1, 1, 1, 1};
  const auto c = compression_energy_check(g, top_k(g, 1));
  EXPECT_DOUBLE_EQ(c.residual, 3.0);
  EXPECT_DOUBLE_EQ(c.bound, 3.0);
  EXPECT_TRUE(c.holds());
}

TEST(Energy, HoldsOnRandomVectors) {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const auto g = gaussian(100, rng);
    EXPECT_TRUE(compression_energy_check(g, top_k(g, 10)).holds());
  }
}

TEST(Payload, ReferenceDimension) {
  const auto p = payload_bytes(1226, 122570, 4.0, 50);
  EXPECT_EQ(index_bits(122570), 17u);
  EXPECT_DOUBLE_EQ(p.per_entry, 6.125);
  EXPECT_DOUBLE_EQ(p.per_client, 7509.25);
  EXPECT_DOUBLE_EQ(p.per_block, 375462.5);
  EXPECT_DOUBLE_EQ(p.dense_per_client, 122570.0 * 4.0);
}

TEST(Payload, DenseTransferHasNoIndexOverhead) {
  const std::size_t d = 122570;
  EXPECT_GT(payload_bytes(d, d, 4.0).per_client, 4.0 * d);
  EXPECT_DOUBLE_EQ(transmitted_bytes(d, d, 4.0), 4.0 * d);
  EXPECT_DOUBLE_EQ(transmitted_bytes(1226, d, 4.0), 7509.25);
}

TEST(Payload, IndexWidths) {
  EXPECT_EQ(index_bits(1), 0u);
  EXPECT_EQ(index_bits(2), 1u);
  EXPECT_EQ(index_bits(256), 8u);
  EXPECT_EQ(index_bits(257), 9u);
  EXPECT_EQ(wire_index_bytes(256), 1u);
  EXPECT_EQ(wire_index_bytes(257), 2u);
  EXPECT_EQ(wire_index_bytes(122570), 3u);
}

TEST(Wire, RoundTripsDoubles) {
  Rng rng(9);
  const auto g = gaussian(1000, rng);
  auto u = top_k(g, 37);
  u.round = 4;
  u.client_id = 12;
  const auto bytes = encode(u, 8);
  EXPECT_EQ(bytes.size(), 16u + 37u * (2u + 8u));
  EXPECT_EQ(decode(bytes, 8), u);
}

TEST(Wire, FloatValuesRoundOnce) {
  const std::vector<double> g = {0.1, -1.0 / 3.0, 2.0};
  auto u = top_k(g, 3);
  round_to_wire(u, 4);
  EXPECT_EQ(u.values[0], static_cast<double>(0.1f));
  const auto back = decode(encode(u, 4), 4);
  EXPECT_EQ(back, u);
  EXPECT_EQ(encode(u, 4).size(), 16u + 3u * 4u);  // k == d: no indices
}

TEST(Wire, TruncationIsDetected) {
  const std::vector<double> g = {1.0, 2.0, 3.0, 4.0};
  auto bytes = encode(top_k(g, 2), 8);
  bytes.pop_back();
  EXPECT_THROW(decode(bytes, 8), Error);
}

TEST(Compressor, DeclaresRatio) {
  const auto c = make_compressor(CompressionSpec::top_k(5, 50));
  EXPECT_DOUBLE_EQ(c->gamma(50), 0.1);
  EXPECT_EQ(c->name(), "top_k");
}

}  // namespace
}  // namespace bcfl::compression
