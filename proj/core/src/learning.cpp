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

#include "bcfl/learning.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "bcfl/error.hpp"
#include "bcfl/random.hpp"

namespace bcfl::learning {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;

struct LayerView {
  std::size_t weight_offset;
  std::size_t bias_offset;
  std::size_t in;
  std::size_t out;
};

std::vector<LayerView> layer_views(const Architecture& arch) {
  std::vector<LayerView> views;
  views.reserve(arch.layer_count());
  std::size_t offset = 0;
  for (std::size_t l = 0; l < arch.layer_count(); ++l) {
    const std::size_t in = arch.layer_input(l);
    const std::size_t out = arch.layer_output(l);
    views.push_back({offset, offset + in * out, in, out});
    offset += in * out + out;
  }
  return views;
}

void check_inputs(const Architecture& arch, std::span<const double> params,
                  const Samples& samples) {
  require(params.size() == arch.parameter_count(), ErrorKind::kParameter,
          "parameter vector has length " + std::to_string(params.size()) + ", architecture needs " +
              std::to_string(arch.parameter_count()));
  require(!samples.empty(), ErrorKind::kData, "sample set is empty");
  require(samples.feature_dim == arch.input_dim, ErrorKind::kData,
          "feature dimension " + std::to_string(samples.feature_dim) +
              " does not match model input " + std::to_string(arch.input_dim));
  for (int label : samples.labels) {
    require(label >= 0 && static_cast<std::size_t>(label) < arch.num_classes, ErrorKind::kData,
            "label " + std::to_string(label) + " outside [0, " +
                std::to_string(arch.num_classes) + ")");
  }
}

// Forward pass keeping pre-activations and activations for backprop.
struct ForwardCache {
  std::vector<RowMatrix> pre;         // Z_l, l = 0..L-1
  std::vector<RowMatrix> activation;  // A_l for hidden layers
  RowMatrix probabilities;
  double loss = 0.0;
  std::size_t correct = 0;
};

ForwardCache forward(const Architecture& arch, std::span<const double> params,
                     const Samples& samples) {
  const auto views = layer_views(arch);
  const auto n = static_cast<Eigen::Index>(samples.size());
  const RowMatrix input =
      ConstRowMap(samples.features.data(), n, static_cast<Eigen::Index>(samples.feature_dim));

  ForwardCache cache;
  cache.pre.reserve(views.size());
  cache.activation.reserve(views.size());
  for (std::size_t l = 0; l < views.size(); ++l) {
    const auto& v = views[l];
    const RowMatrix w = ConstRowMap(params.data() + v.weight_offset,
                                    static_cast<Eigen::Index>(v.out), static_cast<Eigen::Index>(v.in));
    const Eigen::RowVectorXd b = Eigen::Map<const Eigen::RowVectorXd>(
        params.data() + v.bias_offset, static_cast<Eigen::Index>(v.out));
    RowMatrix z = (l == 0 ? RowMatrix(input * w.transpose())
                          : RowMatrix(cache.activation.back() * w.transpose()));
    z.rowwise() += b;
    if (l + 1 < views.size()) {
      RowMatrix a = arch.activation == Activation::kRelu ? RowMatrix(z.cwiseMax(0.0))
                                                         : RowMatrix(z.array().tanh().matrix());
      cache.pre.push_back(std::move(z));
      cache.activation.push_back(std::move(a));
    } else {
      cache.pre.push_back(std::move(z));
    }
  }

  const RowMatrix& logits = cache.pre.back();
  cache.probabilities.resize(n, logits.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double peak = logits.row(i).maxCoeff();
    double denom = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      const double e = std::exp(logits(i, c) - peak);
      cache.probabilities(i, c) = e;
      denom += e;
    }
    cache.probabilities.row(i) /= denom;
    const int y = samples.labels[static_cast<std::size_t>(i)];
    total += std::log(denom) + peak - logits(i, y);
    Eigen::Index argmax = 0;
    logits.row(i).maxCoeff(&argmax);
    if (argmax == y) ++cache.correct;
  }
  cache.loss = total / static_cast<double>(n);
  return cache;
}

}  // namespace

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  fail(ErrorKind::kConfig, "unknown activation '" + name + "'");
}

std::string to_string(Activation activation) {
  return activation == Activation::kRelu ? "relu" : "tanh";
}

std::size_t Architecture::layer_input(std::size_t layer) const {
  return layer == 0 ? input_dim : hidden_widths[layer - 1];
}

std::size_t Architecture::layer_output(std::size_t layer) const {
  return layer < hidden_widths.size() ? hidden_widths[layer] : num_classes;
}

std::size_t Architecture::parameter_count() const {
  std::size_t d = 0;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    d += layer_input(l) * layer_output(l) + layer_output(l);
  }
  return d;
}

void Architecture::validate() const {
  require(input_dim > 0, ErrorKind::kParameter, "architecture input width must be positive");
  require(num_classes >= 2, ErrorKind::kParameter, "architecture needs at least two classes");
  for (std::size_t w : hidden_widths) {
    require(w > 0, ErrorKind::kParameter, "architecture has a zero-width hidden layer");
  }
}

void Samples::append(std::span<const double> x, int label) {
  if (empty() && features.empty() && feature_dim == 0) feature_dim = x.size();
  require(x.size() == feature_dim, ErrorKind::kData, "sample width mismatch");
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(label);
}

Samples subset(const Samples& samples, std::span<const std::size_t> indices) {
  Samples out;
  out.feature_dim = samples.feature_dim;
  out.features.reserve(indices.size() * samples.feature_dim);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    require(i < samples.size(), ErrorKind::kData, "batch index out of range");
    out.append(samples.row(i), samples.labels[i]);
  }
  return out;
}

std::size_t FederatedDataset::total_training_samples() const {
  std::size_t total = 0;
  for (const auto& c : clients) total += c.size();
  return total;
}

ParamVector init_model(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  Rng rng(seed);
  ParamVector params(arch.parameter_count());
  for (const auto& v : layer_views(arch)) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(v.in));
    for (std::size_t i = v.weight_offset; i < v.bias_offset + v.out; ++i) {
      params[i] = scale * (2.0 * rng.uniform() - 1.0);
    }
  }
  return params;
}

double loss(const Architecture& arch, std::span<const double> params, const Samples& samples) {
  check_inputs(arch, params, samples);
  return forward(arch, params, samples).loss;
}

Evaluation evaluate(const Architecture& arch, std::span<const double> params,
                    const Samples& samples) {
  check_inputs(arch, params, samples);
  const auto cache = forward(arch, params, samples);
  return {cache.loss, static_cast<double>(cache.correct) / static_cast<double>(samples.size())};
}

LossAndGradient loss_and_gradient(const Architecture& arch, std::span<const double> params,
                                  const Samples& samples) {
  check_inputs(arch, params, samples);
  auto cache = forward(arch, params, samples);
  const auto views = layer_views(arch);
  const auto n = static_cast<Eigen::Index>(samples.size());
  const RowMatrix input =
      ConstRowMap(samples.features.data(), n, static_cast<Eigen::Index>(samples.feature_dim));

  LossAndGradient out;
  out.loss = cache.loss;
  out.gradient.assign(params.size(), 0.0);

  RowMatrix delta = std::move(cache.probabilities);
  for (Eigen::Index i = 0; i < n; ++i) delta(i, samples.labels[static_cast<std::size_t>(i)]) -= 1.0;
  delta /= static_cast<double>(n);

  for (std::size_t l = views.size(); l-- > 0;) {
    const auto& v = views[l];
    RowMatrix grad_w(static_cast<Eigen::Index>(v.out), static_cast<Eigen::Index>(v.in));
    if (l == 0) {
      grad_w.noalias() = delta.transpose() * input;
    } else {
      grad_w.noalias() = delta.transpose() * cache.activation[l - 1];
    }
    const Eigen::RowVectorXd grad_b = delta.colwise().sum();
    RowMap(out.gradient.data() + v.weight_offset, grad_w.rows(), grad_w.cols()) = grad_w;
    Eigen::Map<Eigen::RowVectorXd>(out.gradient.data() + v.bias_offset, grad_b.size()) = grad_b;
    if (l == 0) break;

    const RowMatrix w = ConstRowMap(params.data() + v.weight_offset,
                                    static_cast<Eigen::Index>(v.out), static_cast<Eigen::Index>(v.in));
    RowMatrix upstream = delta * w;
    if (arch.activation == Activation::kRelu) {
      upstream.array() *= (cache.pre[l - 1].array() > 0.0).cast<double>();
    } else {
      upstream.array() *= 1.0 - cache.activation[l - 1].array().square();
    }
    delta = std::move(upstream);
  }
  return out;
}

ParamVector gradient(const Architecture& arch, std::span<const double> params,
                     const Samples& samples) {
  return loss_and_gradient(arch, params, samples).gradient;
}

std::vector<Samples> partition(const Samples& pool, const PartitionSpec& spec) {
  require(spec.clients >= 1, ErrorKind::kConfig, "partition needs at least one client");
  require(spec.per_client >= 1, ErrorKind::kConfig, "per-client sample count must be positive");
  require(spec.labels_per_client >= 1 && spec.labels_per_client <= spec.label_count,
          ErrorKind::kConfig, "labels_per_client must lie in [1, label_count]");

  std::vector<std::vector<std::size_t>> rows_by_label(spec.label_count);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const int y = pool.labels[i];
    require(y >= 0 && static_cast<std::size_t>(y) < spec.label_count, ErrorKind::kData,
            "pool label out of range");
    rows_by_label[static_cast<std::size_t>(y)].push_back(i);
  }

  Rng rng(spec.seed);
  std::vector<Samples> clients;
  clients.reserve(spec.clients);
  std::vector<std::size_t> labels(spec.label_count);
  for (std::size_t c = 0; c < spec.clients; ++c) {
    std::iota(labels.begin(), labels.end(), std::size_t{0});
    if (spec.labels_per_client < spec.label_count) {
      for (std::size_t i = 0; i < spec.labels_per_client; ++i) {
        std::swap(labels[i], labels[i + rng.index(spec.label_count - i)]);
      }
    }
    std::vector<std::size_t> chosen(labels.begin(),
                                    labels.begin() + static_cast<long>(spec.labels_per_client));
    std::sort(chosen.begin(), chosen.end());

    std::vector<std::size_t> candidates;
    for (std::size_t y : chosen) {
      candidates.insert(candidates.end(), rows_by_label[y].begin(), rows_by_label[y].end());
    }
    std::sort(candidates.begin(), candidates.end());
    if (spec.per_client > candidates.size()) {
      fail(ErrorKind::kConfig, "client " + std::to_string(c) + " needs " +
                                   std::to_string(spec.per_client) + " samples but only " +
                                   std::to_string(candidates.size()) + " carry its labels");
    }
    for (std::size_t i = 0; i < spec.per_client; ++i) {
      std::swap(candidates[i], candidates[i + rng.index(candidates.size() - i)]);
    }
    clients.push_back(subset(pool, std::span(candidates).first(spec.per_client)));
  }
  return clients;
}

FederatedDataset generate_federated(const GenerationSpec& spec) {
  require(spec.label_count >= 2, ErrorKind::kConfig, "need at least two labels");
  require(spec.feature_dim >= 1, ErrorKind::kConfig, "feature dimension must be positive");
  require(spec.test_size >= 1, ErrorKind::kConfig, "test set must be non-empty");

  Rng rng(spec.seed);
  std::vector<double> centers(spec.label_count * spec.feature_dim);
  for (double& c : centers) c = spec.center_scale * rng.normal();

  std::vector<double> x(spec.feature_dim);
  auto draw = [&](std::size_t label, Samples& into) {
    for (std::size_t f = 0; f < spec.feature_dim; ++f) {
      x[f] = centers[label * spec.feature_dim + f] + spec.noise * rng.normal();
    }
    into.append(x, static_cast<int>(label));
  };

  std::size_t per_label = spec.pool_per_label;
  if (per_label == 0) {
    per_label = (spec.clients * spec.per_client + spec.label_count - 1) / spec.label_count;
  }
  Samples pool;
  pool.feature_dim = spec.feature_dim;
  for (std::size_t y = 0; y < spec.label_count; ++y) {
    for (std::size_t i = 0; i < per_label; ++i) draw(y, pool);
  }

  FederatedDataset data;
  data.label_count = spec.label_count;
  data.iid = spec.labels_per_client == spec.label_count;
  data.test_set.feature_dim = spec.feature_dim;
  for (std::size_t i = 0; i < spec.test_size; ++i) draw(i % spec.label_count, data.test_set);

  data.clients = partition(pool, {spec.clients, spec.per_client, spec.labels_per_client,
                                  spec.label_count, derive_seed(spec.seed, 1)});
  return data;
}

Samples read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::kIo, "cannot open dataset " + path.string());
  Samples out;
  std::string line;
  std::vector<double> values;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    values.clear();
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) {
        numeric = false;
        break;
      }
      values.push_back(v);
    }
    if (!numeric) {
      require(out.empty(), ErrorKind::kData,
              path.string() + ":" + std::to_string(line_no) + ": non-numeric field");
      continue;  // header row
    }
    require(values.size() >= 2, ErrorKind::kData,
            path.string() + ":" + std::to_string(line_no) + ": need features and a label");
    const double label = values.back();
    require(label >= 0 && label == std::floor(label), ErrorKind::kData,
            path.string() + ":" + std::to_string(line_no) + ": label must be a non-negative integer");
    values.pop_back();
    if (out.empty() && out.features.empty()) out.feature_dim = values.size();
    require(values.size() == out.feature_dim, ErrorKind::kData,
            path.string() + ":" + std::to_string(line_no) + ": inconsistent column count");
    out.append(values, static_cast<int>(label));
  }
  require(!out.empty(), ErrorKind::kData, "dataset " + path.string() + " has no rows");
  return out;
}

FederatedDataset load_federated_csv(const std::filesystem::path& path, const PartitionSpec& spec,
                                    double test_fraction) {
  require(test_fraction > 0.0 && test_fraction < 1.0, ErrorKind::kConfig,
          "test fraction must lie in (0, 1)");
  const Samples all = read_csv(path);
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(spec.seed, 2));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  const auto test_count =
      std::max<std::size_t>(1, static_cast<std::size_t>(test_fraction * static_cast<double>(all.size())));
  require(test_count < all.size(), ErrorKind::kConfig, "test fraction leaves no training rows");

  FederatedDataset data;
  data.label_count = spec.label_count;
  data.iid = spec.labels_per_client == spec.label_count;
  data.test_set = subset(all, std::span(order).first(test_count));
  const Samples pool = subset(all, std::span(order).subspan(test_count));
  data.clients = partition(pool, spec);
  return data;
}

double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace bcfl::learning
