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
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bcfl/chain.hpp"
#include "bcfl/compression.hpp"
#include "bcfl/learning.hpp"
#include "bcfl/random.hpp"
#include "bcfl/timecost.hpp"

namespace bcfl::protocol {

using learning::ParamVector;

/// A client's local empirical loss. An empty batch means every local sample.
class LocalObjective {
 public:
  virtual ~LocalObjective() = default;
  virtual std::size_t dim() const = 0;
  virtual std::size_t sample_count() const = 0;
  virtual learning::LossAndGradient loss_and_gradient(std::span<const double> w,
                                                      std::span<const std::size_t> batch) const = 0;
  learning::LossAndGradient full(std::span<const double> w) const { return loss_and_gradient(w, {}); }
};

/// Softmax MLP on one client's samples. Holds references; the architecture
/// and samples must outlive the objective.
class MlpObjective final : public LocalObjective {
 public:
  MlpObjective(const learning::Architecture& arch, const learning::Samples& samples)
      : arch_(arch), samples_(samples) {}
  std::size_t dim() const override { return arch_.parameter_count(); }
  std::size_t sample_count() const override { return samples_.size(); }
  learning::LossAndGradient loss_and_gradient(std::span<const double> w,
                                              std::span<const std::size_t> batch) const override;

 private:
  const learning::Architecture& arch_;
  const learning::Samples& samples_;
};

/// Linear loss <g, w>: every step moves by exactly -eta * g.
class ConstantGradientObjective final : public LocalObjective {
 public:
  explicit ConstantGradientObjective(std::vector<double> g) : g_(std::move(g)) {}
  std::size_t dim() const override { return g_.size(); }
  std::size_t sample_count() const override { return 1; }
  learning::LossAndGradient loss_and_gradient(std::span<const double> w,
                                              std::span<const std::size_t> batch) const override;

 private:
  std::vector<double> g_;
};

/// 0.5 * curvature * ||w - center||^2.
class QuadraticObjective final : public LocalObjective {
 public:
  QuadraticObjective(double curvature, std::vector<double> center)
      : curvature_(curvature), center_(std::move(center)) {}
  std::size_t dim() const override { return center_.size(); }
  std::size_t sample_count() const override { return 1; }
  learning::LossAndGradient loss_and_gradient(std::span<const double> w,
                                              std::span<const std::size_t> batch) const override;

 private:
  double curvature_;
  std::vector<double> center_;
};

struct ClientState {
  std::uint32_t id = 0;
  ParamVector w;
  ParamVector m;  // compensation error, zero at start
  double up_rate = 0.0;    // mean bytes/s
  double down_rate = 0.0;  // mean bytes/s
};

ClientState make_client(std::uint32_t id, std::size_t d, double up_rate = 0.0,
                        double down_rate = 0.0);

struct LocalStep {
  std::size_t epochs = 5;
  double eta = 0.05;
  std::size_t k = 1;
  std::size_t value_bytes = 8;  // width the sent values are rounded to
  std::size_t batch_size = 0;   // 0: full batch
  std::uint32_t round = 0;
};

struct ClientRoundResult {
  compression::SparseUpdate sent;
  ClientState next;
  ParamVector raw;  // w_after - w_global + m_prev
  double start_loss = 0.0;
  std::vector<double> gradient_norms_sq;  // one per local step
};

/// E gradient steps from w_global, then Top-k of the compensated update.
/// densify(sent) + next.m == raw holds exactly.
ClientRoundResult client_round(const ClientState& state, std::span<const double> w_global,
                               const LocalObjective& objective, const LocalStep& step,
                               Rng* batch_rng = nullptr);

struct AggregationPolicy {
  bool allow_missing = false;
};

/// w_prev + (1/n_clients) * sum of updates, summed in client-id order.
/// Updates must be sorted by client id without duplicates and share one
/// round and dimension; unless allow_missing, all n_clients must be present.
ParamVector aggregate(std::span<const compression::SparseUpdate> updates,
                      std::span<const double> w_prev, std::size_t n_clients,
                      AggregationPolicy policy = {});

enum class Mode { kAnalytic, kStochastic };
Mode parse_mode(const std::string& text);
std::string to_string(Mode mode);

struct SystemConfig {
  std::size_t n_clients = 50;
  std::size_t n_miners = 50;
  std::size_t epochs = 5;
  double eta = 0.05;
  std::size_t batch_size = 0;
  std::size_t k = 1;
  double lambda = 0.4;
  double budget_s = 500.0;
  std::size_t value_bytes = 4;
  std::uint64_t seed = 1;
  Mode mode = Mode::kAnalytic;
  double dropout = 0.0;
  bool proof_of_work = false;
  double hash_rate = 2000.0;
  double rate_smoothing = 0.3;  // EMA weight of each new rate sample
  bool record_gradient_norms = false;

  void validate(std::size_t d) const;
};

struct ByteCounts {
  double uploaded = 0.0;
  double crossed = 0.0;
  double propagated = 0.0;
  double downloaded = 0.0;

  double total() const { return uploaded + crossed + propagated + downloaded; }
};

struct RoundRecord {
  std::size_t round = 0;  // 1-based
  timecost::RoundTerms tau;
  std::size_t fork_attempts = 1;
  ByteCounts bytes;
  double test_loss = 0.0;
  double test_acc = 0.0;
  double cum_time_s = 0.0;
  std::size_t k = 0;
  double lambda = 0.0;
  std::size_t responders = 0;
  std::uint32_t winner = 0;
  double max_residual_sq = 0.0;  // max over clients of ||m||^2 after the round
};

/// Header line of the per-round metrics CSV.
std::string metrics_csv_header();
std::string metrics_csv_row(const RoundRecord& r);

struct ExperimentLog {
  std::vector<RoundRecord> rounds;
  std::vector<std::string> warnings;
  ParamVector final_model;
  learning::Evaluation initial;
  learning::Evaluation final;
  double total_bytes = 0.0;

  std::size_t completed_rounds() const { return rounds.size(); }
};

using Evaluator = std::function<learning::Evaluation(std::span<const double>)>;

/// Timing and participation drawn for one round before any training happens.
struct RoundPlan {
  timecost::RoundTerms tau;
  std::vector<bool> responds;
  chain::MiningOutcome mining;
  ByteCounts bytes;
  std::vector<double> up_rates;
  std::vector<double> down_rates;
  std::vector<double> miner_rates;
};

/// Alg. 1 with a virtual clock and an append-only ledger.
class Simulation {
 public:
  Simulation(SystemConfig config, timecost::NetworkEnv env,
             std::vector<std::shared_ptr<const LocalObjective>> objectives, ParamVector w0,
             Evaluator evaluator = {});

  /// Draws the next round's timing without advancing any state but the
  /// timing and dropout streams.
  RoundPlan plan_round();
  RoundRecord execute(const RoundPlan& plan);
  /// Plans a round and runs it if it fits in the budget; otherwise nullopt.
  std::optional<RoundRecord> run_round();

  using RoundHook = std::function<void(Simulation&, const RoundRecord&)>;
  ExperimentLog run(const RoundHook& after_round = {});

  void set_operating_point(std::size_t k, double lambda);

  const SystemConfig& config() const { return config_; }
  const timecost::NetworkEnv& env() const { return env_; }
  /// Mean rates smoothed over the samples seen so far (stochastic mode).
  const timecost::NetworkEnv& measured_env() const { return measured_; }
  const ParamVector& global_model() const { return w_; }
  const std::vector<ClientState>& clients() const { return clients_; }
  const chain::Ledger& ledger() const { return ledger_; }
  double cum_time() const { return cum_time_; }
  std::size_t rounds_done() const { return round_; }
  const std::vector<double>& gradient_norm_samples() const { return grad_norms_; }
  std::size_t dim() const { return w_.size(); }
  double per_client_bytes() const;

 private:
  void plan_analytic(RoundPlan& plan);
  void plan_stochastic(RoundPlan& plan);
  void smooth_rates(const RoundPlan& plan);

  SystemConfig config_;
  timecost::NetworkEnv env_;
  timecost::NetworkEnv measured_;
  std::vector<std::shared_ptr<const LocalObjective>> objectives_;
  Evaluator evaluator_;
  std::vector<ClientState> clients_;
  ParamVector w_;
  chain::Ledger ledger_;
  Rng timing_rng_;
  Rng dropout_rng_;
  std::uint64_t batch_seed_;
  double cum_time_ = 0.0;
  std::size_t round_ = 0;
  std::vector<double> grad_norms_;
};

/// Convenience: build, run, and return the log.
ExperimentLog run_experiment(const SystemConfig& config, const timecost::NetworkEnv& env,
                             std::vector<std::shared_ptr<const LocalObjective>> objectives,
                             ParamVector w0, Evaluator evaluator = {});

}  // namespace bcfl::protocol
