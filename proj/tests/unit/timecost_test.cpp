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
#include <vector>

#include <gtest/gtest.h>

#include "bcfl/error.hpp"
#include "bcfl/random.hpp"
#include "bcfl/timecost.hpp"

namespace bcfl::timecost {
namespace {

NetworkEnv reference_env(std::size_t d = 122570) {
  return NetworkEnv::homogeneous(50, 50, LinkModel{}.rate_bytes_per_s(), d, 4.0, 0.2, 0.0, 0.1);
}

TEST(Shannon, DefaultLinkConstants) {
  EXPECT_NEAR(shannon_rate(20e6, 1e-8, 0.5, 1e-10), 1.1345e8, 1e4);
  EXPECT_DOUBLE_EQ(shannon_rate(20e6, 1e-8, 0.5, 1e-10), 20e6 * std::log2(51.0));
  EXPECT_DOUBLE_EQ(LinkModel{}.rate_bytes_per_s(), 20e6 * std::log2(51.0) / 8.0);
  EXPECT_DOUBLE_EQ(shannon_rate(40e6, 1e-8, 0.5, 1e-10), 2.0 * shannon_rate(20e6, 1e-8, 0.5, 1e-10));
  EXPECT_THROW(shannon_rate(20e6, 0.0, 0.5, 1e-10), Error);
}

TEST(LinkJitter, ZeroJitterIsExact) {
  Rng rng(1);
  EXPECT_EQ(sample_link_rate(123.0, 0.0, rng), 123.0);
}

TEST(LinkJitter, MeanAndPositivity) {
  Rng rng(2);
  const int n = 100000;
  const double mu = 1e6;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = sample_link_rate(mu, 0.1, rng);
    ASSERT_GT(r, 0.0);
    sum += r;
  }
  EXPECT_NEAR(sum / n, mu, 3.0 * 0.1 * mu / std::sqrt(n));
  Rng wide(3);
  for (int i = 0; i < 10000; ++i) ASSERT_GE(sample_link_rate(1.0, 5.0, wide), 0.01);
}

TEST(Assign, OneToOneAndRoundRobin) {
  EXPECT_EQ(assign_clients(3, 3), (std::vector<std::uint32_t>{0, 1, 2}));
  EXPECT_EQ(assign_clients(5, 2), (std::vector<std::uint32_t>{0, 1, 0, 1, 0}));
}

// Closed-form round time for a homogeneous one-to-one environment.
double homogeneous_oracle(double k, double lambda, double u, double n, double omega,
                          double tau) {
  const double b = k * omega;
  const double up = b / u;
  const double cross = (n - 1.0) * b / u;
  const double down = n * b / u;
  const double prop = n * b / u;
  const double mine = (1.0 / lambda + prop) * std::exp(lambda * (n - 1.0) * prop);
  return tau + up + cross + mine + down;
}

TEST(RoundTime, ReferenceEnvironmentExample) {
  const auto env = reference_env();
  const double u = 20e6 * std::log2(51.0) / 8.0;
  const double expected = homogeneous_oracle(1226, 0.4, u, 50, 6.125, 0.2);
  EXPECT_NEAR(h(1226, 0.4, env), expected, 1e-12 * expected);
  const auto t = h_terms(1226, 0.4, env);
  EXPECT_DOUBLE_EQ(t.up, 7509.25 / u);
  EXPECT_DOUBLE_EQ(t.down, 50 * 7509.25 / u);
  EXPECT_DOUBLE_EQ(t.local, 0.2);
}

TEST(RoundTime, IncreasesWithK) {
  const auto env = reference_env();
  double prev = 0.0;
  for (double k = 1; k <= 122570; k *= 1.7) {
    const double v = h(k, 0.4, env);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(RoundTime, SmallPayloadLimit) {
  const auto env = reference_env();
  EXPECT_NEAR(h(1e-9, 0.4, env), 0.2 + 2.5, 1e-9);
}

TEST(RoundTime, HeterogeneousTermsUseSlowestLinks) {
  auto env = reference_env(1000);
  env.client_up[7] /= 4.0;
  env.client_down[3] /= 2.0;
  env.miner_rate[10] /= 3.0;
  const double per_client = 123.0;
  const auto t = round_terms(per_client, 0.5, env);
  EXPECT_DOUBLE_EQ(t.up, per_client / env.client_up[7]);
  EXPECT_DOUBLE_EQ(t.down, 50 * per_client / env.client_down[3]);
  EXPECT_DOUBLE_EQ(t.cross, 49 * per_client / env.miner_rate[10]);
}

TEST(Coefficients, MatchDirectEvaluation) {
  const auto env = reference_env();
  const auto c = h_coefficients(env);
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) {
      const double k = std::min(122570.0, std::exp(std::log(122570.0) * i / 19.0));
      const double lambda = 1e-3 * std::pow(1e4, j / 19.0);
      const double direct = h(k, lambda, env);
      if (!std::isfinite(direct)) continue;
      EXPECT_NEAR(c.h(k, lambda), direct, 1e-12 * direct) << k << " " << lambda;
    }
  }
}

TEST(Coefficients, SingleMinerHasNoForkTerm) {
  const auto env = NetworkEnv::homogeneous(4, 1, 1e6, 100, 4.0, 0.1, 0.0, 0.0);
  const auto c = h_coefficients(env);
  EXPECT_EQ(c.lambda_p, 0.0);
  EXPECT_EQ(c.fork_per_lambda, 0.0);
  EXPECT_DOUBLE_EQ(c.h(10, 2.0), 0.1 + c.lambda_t * 10 + 0.5);
}

TEST(Coefficients, ScaleInverselyWithRates) {
  const auto env = reference_env();
  const auto a = h_coefficients(env);
  const auto b = h_coefficients(env.scaled_rates(2.0));
  EXPECT_DOUBLE_EQ(b.lambda_t, a.lambda_t / 2);
  EXPECT_DOUBLE_EQ(b.lambda_p, a.lambda_p / 2);
  EXPECT_DOUBLE_EQ(b.fork_per_lambda, a.fork_per_lambda / 2);
}

TEST(EnvFile, TextRoundTrip) {
  EnvFile e;
  e.n_clients = 7;
  e.jitter = 0.25;
  e.d = 999;
  const auto back = EnvFile::from_map({{"n_clients", "7"}, {"jitter", "0.25"}, {"d", "999"}});
  EXPECT_EQ(back.to_text(), e.to_text());
  EXPECT_THROW(EnvFile::from_map({{"bogus", "1"}}), Error);
}

TEST(Env, ValidateRejectsBadRates) {
  auto env = reference_env();
  env.client_up[0] = 0.0;
  EXPECT_THROW(env.validate(), Error);
}

}  // namespace
}  // namespace bcfl::timecost
