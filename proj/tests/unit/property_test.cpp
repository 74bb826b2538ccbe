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

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "bcfl/chain.hpp"
#include "bcfl/compression.hpp"
#include "bcfl/error.hpp"
#include "bcfl/kv.hpp"
#include "bcfl/protocol.hpp"
#include "bcfl/random.hpp"
#include "bcfl/timecost.hpp"

namespace bcfl {
namespace {

std::vector<double> heavy_tailed(std::size_t d, Rng& rng) {
  std::vector<double> g(d);
  for (double& x : g) {
    x = rng.normal();
    if (rng.uniform() < 0.1) x *= 100.0;
    if (rng.uniform() < 0.05) x = 0.0;
  }
  return g;
}

TEST(Property, TopKInvariants) {
  Rng rng(101);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t d = 1 + rng.index(300);
    const std::size_t k = 1 + rng.index(d);
    const auto g = heavy_tailed(d, rng);
    const auto u = compression::top_k(g, k);
    ASSERT_EQ(u.size(), k);
    ASSERT_TRUE(std::is_sorted(u.indices.begin(), u.indices.end()));
    ASSERT_EQ(std::set<std::uint32_t>(u.indices.begin(), u.indices.end()).size(), k);
    // Every kept magnitude dominates every dropped one.
    double min_kept = std::numeric_limits<double>::infinity();
    for (double v : u.values) min_kept = std::min(min_kept, std::abs(v));
    const auto dense = compression::densify(u);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < d; ++i) {
      if (kept < k && u.indices[kept] == i) {
        ASSERT_EQ(dense[i], g[i]);
        ++kept;
      } else {
        ASSERT_LE(std::abs(g[i]), min_kept);
      }
    }
    ASSERT_TRUE(compression::compression_energy_check(g, u).holds());
  }
}

TEST(Property, WireRoundTrip) {
  Rng rng(102);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t d = 1 + rng.index(70000);
    const std::size_t k = 1 + rng.index(std::min<std::size_t>(d, 200));
    std::vector<double> g(d);
    for (double& x : g) x = rng.normal();
    auto u = compression::top_k(g, k);
    u.round = static_cast<std::uint32_t>(rng.index(1000));
    u.client_id = static_cast<std::uint32_t>(rng.index(50));
    for (std::size_t s : {4u, 8u}) {
      auto wire = u;
      compression::round_to_wire(wire, s);
      const auto bytes = compression::encode(wire, s);
      const double omega = compression::payload_bytes(k, d, static_cast<double>(s)).per_client;
      if (k < d) {
        ASSERT_EQ(bytes.size(), 16 + k * (compression::wire_index_bytes(d) + s));
        ASSERT_GE(static_cast<double>(bytes.size()), omega);
      }
      ASSERT_EQ(compression::decode(bytes, s), wire);
    }
  }
}

TEST(Property, AggregationIsLinear) {
  Rng rng(103);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 2 + rng.index(100);
    const std::size_t n = 1 + rng.index(10);
    std::vector<compression::SparseUpdate> ups;
    std::vector<double> zero(d, 0.0), w(d);
    for (double& x : w) x = rng.normal();
    for (std::size_t c = 0; c < n; ++c) {
      std::vector<double> g(d);
      for (double& x : g) x = rng.normal();
      auto u = compression::top_k(g, 1 + rng.index(d));
      u.client_id = static_cast<std::uint32_t>(c);
      ups.push_back(u);
    }
    const auto delta = protocol::aggregate(ups, zero, n);
    const auto moved = protocol::aggregate(ups, w, n);
    for (std::size_t i = 0; i < d; ++i) ASSERT_NEAR(moved[i], w[i] + delta[i], 1e-12);
  }
}

TEST(Property, RoundTimeMonotone) {
  Rng rng(104);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(60);
    const std::size_t m = 1 + rng.index(60);
    const std::size_t d = 10 + rng.index(200000);
    auto env = timecost::NetworkEnv::homogeneous(n, m, 1e5 + 1e8 * rng.uniform(), d, 4.0,
                                                 rng.uniform(), 0.0, 0.1);
    for (double& u : env.client_up) u *= 0.5 + rng.uniform();
    for (double& u : env.miner_rate) u *= 0.5 + rng.uniform();
    const double lambda = 0.01 + 5 * rng.uniform();
    const double k1 = 1 + rng.uniform() * (static_cast<double>(d) - 1);
    const double k2 = k1 + rng.uniform() * (static_cast<double>(d) - k1);
    const double h1 = timecost::h(k1, lambda, env);
    const double h2 = timecost::h(k2, lambda, env);
    if (std::isfinite(h2)) ASSERT_LE(h1, h2);
    ASSERT_GE(h1, env.tau_local + 1.0 / lambda);
  }
}

TEST(Property, ForkProbabilityIsMonotone) {
  Rng rng(105);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> speeds(1 + rng.index(20));
    for (double& u : speeds) u = 0.1 + 10 * rng.uniform();
    const double omega = 5 * rng.uniform();
    const double l1 = 0.01 + rng.uniform();
    const double l2 = l1 + rng.uniform();
    const double p1 = chain::fork_probability(l1, omega, speeds);
    const double p2 = chain::fork_probability(l2, omega, speeds);
    ASSERT_GE(p1, 0.0);
    ASSERT_LE(p1, 1.0);
    ASSERT_LE(p1, p2);
    ASSERT_GE(chain::expected_step4_time(l1, omega, speeds), 1.0 / l1);
  }
}

TEST(Property, RealsRoundTripThroughText) {
  Rng rng(106);
  for (int i = 0; i < 10000; ++i) {
    const double v = std::ldexp(rng.normal(), static_cast<int>(rng.index(200)) - 100);
    ASSERT_EQ(std::stod(format_real(v)), v);
  }
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(format_real(1e6), "1e+06");
}

TEST(Property, KeyValueParsing) {
  const auto kv = parse_key_values("# header\n a = 1 \nb=x,y # trailing\n\n");
  EXPECT_EQ(kv.at("a"), "1");
  EXPECT_EQ(kv.at("b"), "x,y");
  KeyValueReader r(kv);
  EXPECT_EQ(r.count("a", 0), 1u);
  EXPECT_THROW(r.reject_unknown(), Error);
  EXPECT_THROW(parse_key_values("novalue\n"), Error);
  const std::map<std::string, std::string> extra = {{"k", "auto"}, {"f", "true"}};
  KeyValueReader autos(extra);
  EXPECT_FALSE(autos.real_or_auto("k", 1.0).has_value());
  EXPECT_TRUE(autos.flag("f", false));
}

TEST(Property, RngIndexInRangeAndStreamsDiffer) {
  Rng rng(107);
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 70000; ++i) ++hist[rng.index(7)];
  for (int c : hist) EXPECT_NEAR(c, 10000, 400);
  std::set<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 1000; ++s) seeds.insert(derive_seed(1, s));
  EXPECT_EQ(seeds.size(), 1000u);
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.normal(), b.normal());
}

}  // namespace
}  // namespace bcfl
