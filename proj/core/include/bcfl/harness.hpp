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
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bcfl/convergence.hpp"
#include "bcfl/learning.hpp"
#include "bcfl/optimizer.hpp"
#include "bcfl/protocol.hpp"
#include "bcfl/timecost.hpp"

namespace bcfl::harness {

struct DataConfig {
  std::string source = "synthetic";  // synthetic | csv
  std::string path;                  // csv only
  std::size_t feature_dim = 64;
  std::size_t label_count = 10;
  std::size_t per_client = 1000;
  /// When nonzero, per_client = total_samples / n_clients.
  std::size_t total_samples = 0;
  std::size_t labels_per_client = 10;
  std::size_t test_size = 1000;
  double center_scale = 0.25;
  double noise = 1.0;
  double test_fraction = 0.2;  // csv only
};

/// Flat key=value experiment description; see README for the schema.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  protocol::Mode mode = protocol::Mode::kAnalytic;
  DataConfig data;
  std::vector<std::size_t> hidden = {128};
  learning::Activation activation = learning::Activation::kRelu;

  std::size_t n_clients = 50;
  std::size_t n_miners = 50;
  std::size_t epochs = 5;
  double eta = 0.05;
  std::size_t batch_size = 0;
  double C = 0.15;

  std::optional<double> k_fraction;  // empty: optimised
  std::optional<double> lambda;      // empty: optimised (or best for a fixed k)
  std::size_t value_bytes = 4;

  timecost::LinkModel link;
  double jitter = 0.1;
  double tau_local_s = 0.2;
  double tau_aggre_s = 0.0;

  std::optional<double> budget_s;  // empty: budget_rounds uncompressed rounds
  double budget_rounds = 3.5;

  std::vector<double> baselines = {0.01, 0.02, 0.03, 1.0};
  double dropout = 0.0;
  std::size_t reoptimize_every = 10;
  double rate_smoothing = 0.3;
  bool proof_of_work = false;
  double hash_rate = 2000.0;
  double probe_k_fraction = 0.01;
  double lambda_min = 1e-4;
  double lambda_max = 100.0;
  std::optional<double> target_accuracy;  // empty: uncompressed arm's best
  std::vector<double> sweep_k = {0.001, 0.005, 0.01, 0.015, 0.02, 0.03};
  std::vector<std::size_t> sweep_clients = {20, 30, 40, 50};

  void validate() const;
  std::string to_text() const;
  static ExperimentConfig from_map(const std::map<std::string, std::string>& kv);
  static ExperimentConfig load(const std::filesystem::path& path);
  /// Applies "key=value" overrides on top of this configuration.
  ExperimentConfig with_overrides(const std::vector<std::string>& assignments) const;
};

/// Data, model and per-client objectives. Objectives point into this object,
/// so it is only handed out behind a unique_ptr.
struct Workload {
  learning::Architecture arch;
  learning::FederatedDataset data;
  learning::ParamVector w0;
  std::vector<std::shared_ptr<const protocol::LocalObjective>> objectives;
  timecost::NetworkEnv env;

  std::size_t dim() const { return w0.size(); }
  protocol::Evaluator evaluator() const;
  protocol::SystemConfig system(const ExperimentConfig& cfg, std::size_t k, double lambda,
                                double budget_s) const;
};

std::unique_ptr<Workload> build_workload(const ExperimentConfig& cfg);

/// Seconds of one expected round when clients send transmitted_bytes(k).
double round_time(const timecost::NetworkEnv& env, std::size_t k, double lambda);
double best_lambda_for_round_time(const timecost::NetworkEnv& env, std::size_t k, double lo,
                                  double hi);

convergence::ConvergenceParams estimate(const ExperimentConfig& cfg, const Workload& work);

struct Plan {
  convergence::ConvergenceParams params;
  convergence::BoundCoefficients bound;
  timecost::HCoefficients hcoef;
  double budget_s = 0.0;
  double lambda_uncompressed = 0.0;
  std::size_t k = 0;
  double lambda = 0.0;
  std::optional<optimizer::AcsSolution> solution;
};

optimizer::Objective make_objective(const Plan& plan, const timecost::NetworkEnv& env,
                                    const ExperimentConfig& cfg, std::size_t d);
Plan make_plan(const ExperimentConfig& cfg, const Workload& work);

struct Reoptimization {
  std::size_t after_round = 0;
  optimizer::AcsSolution solution;
};

struct RunResult {
  ExperimentConfig config;
  Plan plan;
  protocol::ExperimentLog log;
  std::vector<Reoptimization> reoptimizations;
  std::string final_digest;
  std::size_t ledger_blocks = 0;
  std::size_t d = 0;
};

/// Builds, plans, and runs one experiment. With an output directory it writes
/// metrics.csv, summary.json, ledger.chain and solution_trace.json.
RunResult run_simulation(const ExperimentConfig& cfg,
                         const std::optional<std::filesystem::path>& out_dir = std::nullopt);

struct SweepRow {
  std::string label;
  double k_fraction = 0.0;
  std::size_t n_clients = 0;
  std::size_t k = 0;
  double lambda = 0.0;
  std::size_t rounds = 0;
  double final_loss = 0.0;
  double final_acc = 0.0;
  double total_bytes = 0.0;
  double sim_time_s = 0.0;
};

/// One arm per compression ratio; each arm is exactly run_simulation with
/// k_fraction set, written under out_dir/<label>.
std::vector<SweepRow> sweep_k(const ExperimentConfig& cfg, const std::vector<double>& fractions,
                              const std::optional<std::filesystem::path>& out_dir);
/// One arm per client count with the total sample count held fixed.
std::vector<SweepRow> sweep_clients(const ExperimentConfig& cfg,
                                    const std::vector<std::size_t>& counts,
                                    const std::optional<std::filesystem::path>& out_dir);
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct ComparisonRow {
  std::string strategy;
  std::size_t k = 0;
  double lambda = 0.0;
  double comm_rate = 0.0;  // d / k
  std::size_t rounds = 0;
  double total_bytes = 0.0;
  double bytes_per_round = 0.0;
  double final_loss = 0.0;
  double final_acc = 0.0;
  double best_acc = 0.0;
  std::optional<double> time_to_target;
  std::optional<double> reduced_to;  // time_to_target / uncompressed time_to_target
};

struct Comparison {
  double target_accuracy = 0.0;
  std::vector<ComparisonRow> rows;  // optimised arm first, uncompressed last
};

/// Optimised arm plus every baseline fraction, each simulated to the budget.
Comparison run_comparison(const ExperimentConfig& cfg,
                          const std::optional<std::filesystem::path>& out_dir = std::nullopt);
std::string comparison_csv(const Comparison& c);

/// First simulated time at which test accuracy reaches target.
std::optional<double> time_to_accuracy(const protocol::ExperimentLog& log, double target);

std::string params_to_json(const convergence::ConvergenceParams& p);
convergence::ConvergenceParams params_from_json(const std::string& text);
std::string solution_to_json(const optimizer::AcsSolution& s);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace bcfl::harness
