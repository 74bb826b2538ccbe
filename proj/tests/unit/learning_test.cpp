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
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "bcfl/error.hpp"
#include "bcfl/learning.hpp"
#include "bcfl/random.hpp"

namespace bcfl::learning {
namespace {

Samples random_samples(std::size_t n, std::size_t dim, std::size_t classes, Rng& rng) {
  Samples s;
  s.feature_dim = dim;
  std::vector<double> x(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : x) v = rng.normal();
    s.append(x, static_cast<int>(rng.index(classes)));
  }
  return s;
}

Samples doubled(const Samples& s) {
  Samples out = s;
  for (std::size_t i = 0; i < s.size(); ++i) out.append(s.row(i), s.labels[i]);
  return out;
}

TEST(Architecture, ParameterCount) {
  Architecture a{4, {3}, 2, Activation::kRelu};
  EXPECT_EQ(a.parameter_count(), 23u);
  Architecture desk{64, {128}, 10, Activation::kRelu};
  EXPECT_EQ(desk.parameter_count(), 9610u);
  Architecture softmax{5, {}, 3, Activation::kRelu};
  EXPECT_EQ(softmax.parameter_count(), 18u);
}

TEST(Architecture, ZeroWidthIsRejected) {
  Architecture a{4, {0}, 2, Activation::kRelu};
  EXPECT_THROW(a.validate(), Error);
  EXPECT_THROW(init_model(a, 1), Error);
}

TEST(Init, DeterministicPerSeed) {
  Architecture a{2, {2}, 2, Activation::kTanh};
  ASSERT_EQ(a.parameter_count(), 12u);
  EXPECT_EQ(init_model(a, 7), init_model(a, 7));
  EXPECT_NE(init_model(a, 1), init_model(a, 2));
}

TEST(Init, WithinFanInScale) {
  Architecture a{64, {128}, 10, Activation::kRelu};
  const auto w = init_model(a, 3);
  const double first = 1.0 / std::sqrt(64.0);
  for (std::size_t i = 0; i < 64 * 128; ++i) EXPECT_LE(std::abs(w[i]), first);
}

TEST(Loss, UniformOutput) {
  Rng rng(1);
  Architecture two{3, {}, 2, Activation::kRelu};
  auto s2 = random_samples(20, 3, 2, rng);
  EXPECT_NEAR(loss(two, std::vector<double>(two.parameter_count(), 0.0), s2), std::log(2.0), 1e-15);
  Architecture ten{3, {4}, 10, Activation::kRelu};
  auto s10 = random_samples(20, 3, 10, rng);
  EXPECT_NEAR(loss(ten, std::vector<double>(ten.parameter_count(), 0.0), s10), std::log(10.0),
              1e-15);
}

TEST(Loss, DuplicatedSamplesKeepMean) {
  Rng rng(2);
  Architecture a{4, {5}, 3, Activation::kTanh};
  const auto w = init_model(a, 4);
  const auto s = random_samples(13, 4, 3, rng);
  EXPECT_NEAR(loss(a, w, s), loss(a, w, doubled(s)), 1e-14);
  const auto g1 = gradient(a, w, s);
  const auto g2 = gradient(a, w, doubled(s));
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g1[i], g2[i], 1e-14);
}

TEST(Loss, LabelOutOfRange) {
  Architecture a{2, {}, 2, Activation::kRelu};
  Samples s;
  s.feature_dim = 2;
  s.append(std::vector<double>{1.0, 2.0}, 5);
  EXPECT_THROW(loss(a, std::vector<double>(a.parameter_count(), 0.0), s), Error);
}

double central_difference(const Architecture& a, std::vector<double> w, const Samples& s,
                          std::size_t i, double h) {
  const double w0 = w[i];
  w[i] = w0 + h;
  const double up = loss(a, w, s);
  w[i] = w0 - h;
  const double down = loss(a, w, s);
  return (up - down) / (2.0 * h);
}

TEST(Gradient, MatchesFiniteDifferences) {
  Rng rng(8);
  for (auto act : {Activation::kTanh, Activation::kRelu}) {
    Architecture a{3, {4}, 3, act};
    ASSERT_LE(a.parameter_count(), 50u);
    for (int trial = 0; trial < 5; ++trial) {
      const auto w = init_model(a, 100 + trial);
      const auto s = random_samples(7, 3, 3, rng);
      const auto g = gradient(a, w, s);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double fd = central_difference(a, w, s, i, 1e-6);
        EXPECT_LE(std::abs(g[i] - fd), 1e-4 * std::max(1.0, std::abs(fd))) << "i=" << i;
      }
    }
  }
}

TEST(Gradient, VanishesAtConvexMinimum) {
  Rng rng(4);
  Architecture a{2, {}, 2, Activation::kRelu};
  // Overlapping classes keep the minimiser finite.
  Samples s;
  s.feature_dim = 2;
  std::vector<double> x(2);
  for (int i = 0; i < 60; ++i) {
    const int y = i % 2;
    x[0] = rng.normal() + (y ? 0.5 : -0.5);
    x[1] = rng.normal();
    s.append(x, y);
  }
  std::vector<double> w(a.parameter_count(), 0.0);
  for (int it = 0; it < 20000; ++it) {
    const auto g = gradient(a, w, s);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= 1.0 * g[i];
  }
  EXPECT_LE(std::sqrt(squared_norm(gradient(a, w, s))), 1e-6);
}

TEST(Evaluate, AccuracyCountsArgmax) {
  Architecture a{1, {}, 2, Activation::kRelu};
  // logits: class0 = 0, class1 = x
  const std::vector<double> w = {0.0, 1.0, 0.0, 0.0};
  Samples s;
  s.feature_dim = 1;
  s.append(std::vector<double>{2.0}, 1);
  s.append(std::vector<double>{-2.0}, 0);
  s.append(std::vector<double>{3.0}, 0);
  s.append(std::vector<double>{-1.0}, 0);
  EXPECT_DOUBLE_EQ(evaluate(a, w, s).accuracy, 0.75);
}

TEST(Generate, IidClientsSeeEveryLabel) {
  GenerationSpec spec;
  spec.clients = 10;
  spec.per_client = 200;
  spec.test_size = 50;
  const auto data = generate_federated(spec);
  EXPECT_TRUE(data.iid);
  ASSERT_EQ(data.client_count(), 10u);
  for (const auto& c : data.clients) {
    EXPECT_EQ(c.size(), 200u);
    EXPECT_EQ(std::set<int>(c.labels.begin(), c.labels.end()).size(), 10u);
  }
  EXPECT_EQ(data.test_set.size(), 50u);
}

TEST(Generate, LabelSkewLimitsLabels) {
  GenerationSpec spec;
  spec.clients = 20;
  spec.per_client = 30;
  spec.labels_per_client = 5;
  const auto data = generate_federated(spec);
  EXPECT_FALSE(data.iid);
  for (const auto& c : data.clients) {
    EXPECT_LE(std::set<int>(c.labels.begin(), c.labels.end()).size(), 5u);
  }
}

TEST(Generate, Deterministic) {
  GenerationSpec spec;
  spec.clients = 3;
  spec.per_client = 5;
  spec.test_size = 4;
  const auto a = generate_federated(spec);
  const auto b = generate_federated(spec);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.clients[i].features, b.clients[i].features);
    EXPECT_EQ(a.clients[i].labels, b.clients[i].labels);
  }
  spec.seed = 2;
  EXPECT_NE(generate_federated(spec).clients[0].features, a.clients[0].features);
}

TEST(Partition, ImpossibleRequestIsConfigError) {
  Samples pool;
  pool.feature_dim = 1;
  for (int i = 0; i < 4; ++i) pool.append(std::vector<double>{1.0 * i}, i % 2);
  PartitionSpec spec{1, 3, 1, 2, 1};
  try {
    partition(pool, spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST(Csv, ReadsRowsAndSkipsHeader) {
  const auto path = std::filesystem::temp_directory_path() / "bcfl_learning_test.csv";
  {
    std::ofstream f(path);
    f << "# comment\nx0,x1,label\n0.5,1.5,1\n-1,2,0\n";
  }
  const auto s = read_csv(path);
  std::filesystem::remove(path);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.feature_dim, 2u);
  EXPECT_EQ(s.labels, (std::vector<int>{1, 0}));
  EXPECT_DOUBLE_EQ(s.features[1], 1.5);
}

}  // namespace
}  // namespace bcfl::learning
