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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace bcfl::learning {

/// Flat model parameters. Layer l occupies a row-major (out x in) weight block
/// followed by its out-length bias, layers in input-to-output order.
using ParamVector = std::vector<double>;

enum class Activation { kRelu, kTanh };

Activation parse_activation(const std::string& name);
std::string to_string(Activation activation);

/// Fully connected network with softmax output. An empty hidden_widths list is
/// plain softmax regression (convex in the parameters).
struct Architecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_widths;
  std::size_t num_classes = 2;
  Activation activation = Activation::kRelu;

  /// Total parameter count d. Every other module takes d from here.
  std::size_t parameter_count() const;
  std::size_t layer_count() const { return hidden_widths.size() + 1; }
  std::size_t layer_input(std::size_t layer) const;
  std::size_t layer_output(std::size_t layer) const;
  void validate() const;
};

/// Row-major feature matrix plus integer labels.
struct Samples {
  std::size_t feature_dim = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * feature_dim, feature_dim};
  }
  void append(std::span<const double> x, int label);
};

Samples subset(const Samples& samples, std::span<const std::size_t> indices);

struct FederatedDataset {
  std::vector<Samples> clients;
  Samples test_set;
  std::size_t label_count = 0;
  bool iid = true;

  std::size_t client_count() const { return clients.size(); }
  std::size_t total_training_samples() const;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

struct LossAndGradient {
  double loss = 0.0;
  ParamVector gradient;
};

/// Zero-mean uniform entries in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer.
ParamVector init_model(const Architecture& arch, std::uint64_t seed);

/// Mean softmax cross-entropy over the samples.
double loss(const Architecture& arch, std::span<const double> params, const Samples& samples);

/// Backpropagated gradient of loss().
ParamVector gradient(const Architecture& arch, std::span<const double> params,
                     const Samples& samples);

LossAndGradient loss_and_gradient(const Architecture& arch, std::span<const double> params,
                                  const Samples& samples);

Evaluation evaluate(const Architecture& arch, std::span<const double> params,
                    const Samples& samples);

struct GenerationSpec {
  std::size_t clients = 50;
  std::size_t per_client = 40;
  std::size_t labels_per_client = 10;
  std::size_t label_count = 10;
  std::size_t feature_dim = 64;
  std::size_t test_size = 1000;
  /// Pool samples generated per label; 0 sizes the pool to clients*per_client.
  std::size_t pool_per_label = 0;
  /// Per-coordinate standard deviation of the class centers.
  double center_scale = 0.25;
  /// Per-coordinate standard deviation of within-class noise.
  double noise = 1.0;
  std::uint64_t seed = 1;
};

/// Gaussian class clusters partitioned across clients. labels_per_client ==
/// label_count gives IID clients; otherwise each client draws only from its
/// own random subset of labels.
FederatedDataset generate_federated(const GenerationSpec& spec);

struct PartitionSpec {
  std::size_t clients = 50;
  std::size_t per_client = 40;
  std::size_t labels_per_client = 10;
  std::size_t label_count = 10;
  std::uint64_t seed = 1;
};

/// Splits a labelled pool across clients. Each client samples without
/// replacement from the pool rows carrying its labels; clients may overlap.
std::vector<Samples> partition(const Samples& pool, const PartitionSpec& spec);

/// CSV rows of feature_dim reals followed by an integer label; '#' lines and a
/// non-numeric header row are skipped.
Samples read_csv(const std::filesystem::path& path);

/// Loads a CSV pool, holds out test_fraction of it, and partitions the rest.
FederatedDataset load_federated_csv(const std::filesystem::path& path,
                                    const PartitionSpec& spec, double test_fraction);

double squared_norm(std::span<const double> v);

}  // namespace bcfl::learning
