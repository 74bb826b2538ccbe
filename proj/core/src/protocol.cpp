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

#include "bcfl/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bcfl/error.hpp"
#include "bcfl/kv.hpp"

namespace bcfl::protocol {
namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::vector<std::size_t> draw_batch(std::size_t n, std::size_t b, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < b; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
  idx.resize(b);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

learning::LossAndGradient MlpObjective::loss_and_gradient(std::span<const double> w,
                                                          std::span<const std::size_t> batch) const {
  if (batch.empty()) return learning::loss_and_gradient(arch_, w, samples_);
  return learning::loss_and_gradient(arch_, w, learning::subset(samples_, batch));
}

learning::LossAndGradient ConstantGradientObjective::loss_and_gradient(
    std::span<const double> w, std::span<const std::size_t>) const {
  require(w.size() == g_.size(), ErrorKind::kParameter, "objective: dimension mismatch");
  return {std::inner_product(w.begin(), w.end(), g_.begin(), 0.0), g_};
}

learning::LossAndGradient QuadraticObjective::loss_and_gradient(
    std::span<const double> w, std::span<const std::size_t>) const {
  require(w.size() == center_.size(), ErrorKind::kParameter, "objective: dimension mismatch");
  learning::LossAndGradient out;
  out.gradient.resize(w.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double diff = w[i] - center_[i];
    sq += diff * diff;
    out.gradient[i] = curvature_ * diff;
  }
  out.loss = 0.5 * curvature_ * sq;
  return out;
}

ClientState make_client(std::uint32_t id, std::size_t d, double up_rate, double down_rate) {
  ClientState c;
  c.id = id;
  c.w.assign(d, 0.0);
  c.m.assign(d, 0.0);
  c.up_rate = up_rate;
  c.down_rate = down_rate;
  return c;
}

ClientRoundResult client_round(const ClientState& state, std::span<const double> w_global,
                               const LocalObjective& objective, const LocalStep& step,
                               Rng* batch_rng) {
  const std::size_t d = w_global.size();
  require(state.m.size() == d && objective.dim() == d, ErrorKind::kParameter,
          "client " + std::to_string(state.id) + ": model, compensation and objective disagree in d");
  require(step.epochs >= 1 && step.eta > 0.0, ErrorKind::kParameter,
          "local training needs E >= 1 and eta > 0");
  const std::size_t n = objective.sample_count();
  const bool minibatch = step.batch_size > 0 && step.batch_size < n;
  require(!minibatch || batch_rng != nullptr, ErrorKind::kParameter,
          "mini-batch training needs a random source");

  auto where = [&](std::size_t e) {
    return "round " + std::to_string(step.round) + " client " + std::to_string(state.id) +
           " local step " + std::to_string(e);
  };

  ClientRoundResult out;
  ParamVector w(w_global.begin(), w_global.end());
  out.gradient_norms_sq.reserve(step.epochs);
  for (std::size_t e = 0; e < step.epochs; ++e) {
    std::vector<std::size_t> batch;
    if (minibatch) batch = draw_batch(n, step.batch_size, *batch_rng);
    auto lg = objective.loss_and_gradient(w, batch);
    require(std::isfinite(lg.loss), ErrorKind::kDivergence, where(e) + ": non-finite loss");
    require(all_finite(lg.gradient), ErrorKind::kDivergence, where(e) + ": non-finite gradient");
    if (e == 0) out.start_loss = lg.loss;
    out.gradient_norms_sq.push_back(learning::squared_norm(lg.gradient));
    for (std::size_t i = 0; i < d; ++i) w[i] -= step.eta * lg.gradient[i];
  }
  require(all_finite(w), ErrorKind::kDivergence, where(step.epochs) + ": non-finite parameters");

  out.raw.resize(d);
  for (std::size_t i = 0; i < d; ++i) out.raw[i] = (w[i] - w_global[i]) + state.m[i];
  out.sent = compression::top_k(out.raw, step.k);
  out.sent.round = step.round;
  out.sent.client_id = state.id;
  compression::round_to_wire(out.sent, step.value_bytes);

  out.next = state;
  out.next.w = std::move(w);
  out.next.m = out.raw;
  for (std::size_t j = 0; j < out.sent.size(); ++j) {
    const auto i = out.sent.indices[j];
    out.next.m[i] = out.raw[i] - out.sent.values[j];
  }
  return out;
}

ParamVector aggregate(std::span<const compression::SparseUpdate> updates,
                      std::span<const double> w_prev, std::size_t n_clients,
                      AggregationPolicy policy) {
  require(n_clients >= 1, ErrorKind::kParameter, "aggregation needs at least one client");
  require(updates.size() <= n_clients, ErrorKind::kIntegrity, "more updates than clients");
  require(policy.allow_missing || updates.size() == n_clients, ErrorKind::kIntegrity,
          "block has " + std::to_string(updates.size()) + " updates for " +
              std::to_string(n_clients) + " clients");
  const std::size_t d = w_prev.size();
  std::vector<double> sum(d, 0.0);
  for (std::size_t u = 0; u < updates.size(); ++u) {
    const auto& up = updates[u];
    require(up.dim == d, ErrorKind::kIntegrity, "update dimension differs from the model");
    require(up.client_id < n_clients, ErrorKind::kIntegrity, "update from unknown client");
    require(u == 0 || up.client_id > updates[u - 1].client_id, ErrorKind::kIntegrity,
            "updates not sorted by client id or duplicated");
    require(u == 0 || up.round == updates[0].round, ErrorKind::kIntegrity,
            "updates from different rounds in one block");
    require(up.indices.size() == up.values.size(), ErrorKind::kIntegrity,
            "update has mismatched index/value counts");
    for (std::size_t j = 0; j < up.size(); ++j) {
      require(up.indices[j] < d, ErrorKind::kIntegrity, "update index out of range");
      sum[up.indices[j]] += up.values[j];
    }
  }
  const auto n = static_cast<double>(n_clients);
  ParamVector w(d);
  for (std::size_t i = 0; i < d; ++i) w[i] = w_prev[i] + sum[i] / n;
  return w;
}

Mode parse_mode(const std::string& text) {
  if (text == "analytic") return Mode::kAnalytic;
  if (text == "stochastic") return Mode::kStochastic;
  fail(ErrorKind::kConfig, "unknown mode '" + text + "' (expected analytic or stochastic)");
}

std::string to_string(Mode mode) { return mode == Mode::kAnalytic ? "analytic" : "stochastic"; }

void SystemConfig::validate(std::size_t d) const {
  require(n_clients >= 1 && n_miners >= 1, ErrorKind::kConfig, "N and M must be at least 1");
  require(epochs >= 1, ErrorKind::kConfig, "E must be at least 1");
  require(eta > 0.0 && std::isfinite(eta), ErrorKind::kConfig, "eta must be positive");
  require(k >= 1 && k <= d, ErrorKind::kConfig,
          "k must lie in [1, d], got k=" + std::to_string(k) + " d=" + std::to_string(d));
  require(lambda > 0.0 && std::isfinite(lambda), ErrorKind::kConfig, "lambda must be positive");
  require(budget_s > 0.0, ErrorKind::kConfig, "budget Y must be positive");
  require(value_bytes == 4 || value_bytes == 8, ErrorKind::kConfig, "s must be 4 or 8 bytes");
  require(dropout >= 0.0 && dropout < 1.0, ErrorKind::kConfig, "dropout must lie in [0, 1)");
  require(hash_rate > 0.0, ErrorKind::kConfig, "hash rate must be positive");
  require(rate_smoothing > 0.0 && rate_smoothing <= 1.0, ErrorKind::kConfig,
          "rate smoothing must lie in (0, 1]");
}

std::string metrics_csv_header() {
  return "round,tau_local,tau_up,tau_cross,tau_mine,tau_down,tau_aggre,fork_attempts,bytes_total,"
         "cum_time_s,test_loss,test_acc";
}

std::string metrics_csv_row(const RoundRecord& r) {
  std::ostringstream out;
  out << r.round << ',' << format_real(r.tau.local) << ',' << format_real(r.tau.up) << ','
      << format_real(r.tau.cross) << ',' << format_real(r.tau.mine) << ','
      << format_real(r.tau.down) << ',' << format_real(r.tau.aggre) << ',' << r.fork_attempts
      << ',' << format_real(r.bytes.total()) << ',' << format_real(r.cum_time_s) << ','
      << format_real(r.test_loss) << ',' << format_real(r.test_acc);
  return out.str();
}

Simulation::Simulation(SystemConfig config, timecost::NetworkEnv env,
                       std::vector<std::shared_ptr<const LocalObjective>> objectives,
                       ParamVector w0, Evaluator evaluator)
    : config_(config),
      env_(std::move(env)),
      objectives_(std::move(objectives)),
      evaluator_(std::move(evaluator)),
      w_(std::move(w0)),
      timing_rng_(derive_seed(config.seed, 101)),
      dropout_rng_(derive_seed(config.seed, 102)),
      batch_seed_(derive_seed(config.seed, 103)) {
  const std::size_t d = w_.size();
  config_.validate(d);
  env_.validate();
  require(env_.n_clients() == config_.n_clients && env_.n_miners() == config_.n_miners,
          ErrorKind::kConfig, "environment and configuration disagree on N or M");
  require(env_.d == d, ErrorKind::kConfig, "environment d differs from the model dimension");
  require(env_.s == static_cast<double>(config_.value_bytes), ErrorKind::kConfig,
          "environment s differs from the configured value width");
  require(objectives_.size() == config_.n_clients, ErrorKind::kConfig,
          "need one local objective per client");
  for (const auto& obj : objectives_) {
    require(obj && obj->dim() == d, ErrorKind::kConfig, "objective dimension differs from model");
  }
  measured_ = env_;
  clients_.reserve(config_.n_clients);
  for (std::size_t i = 0; i < config_.n_clients; ++i) {
    clients_.push_back(make_client(static_cast<std::uint32_t>(i), d, env_.client_up[i],
                                   env_.client_down[i]));
    clients_.back().w = w_;
  }
  ledger_.append_genesis(w_, static_cast<std::uint32_t>(config_.n_clients),
                         static_cast<std::uint32_t>(config_.value_bytes));
}

double Simulation::per_client_bytes() const {
  return compression::transmitted_bytes(config_.k, w_.size(),
                                        static_cast<double>(config_.value_bytes));
}

void Simulation::set_operating_point(std::size_t k, double lambda) {
  require(k >= 1 && k <= w_.size(), ErrorKind::kParameter, "operating point k outside [1, d]");
  require(lambda > 0.0 && std::isfinite(lambda), ErrorKind::kParameter,
          "operating point lambda must be positive");
  config_.k = k;
  config_.lambda = lambda;
}

RoundPlan Simulation::plan_round() {
  RoundPlan plan;
  const std::size_t n = config_.n_clients;
  plan.responds.assign(n, true);
  if (config_.dropout > 0.0) {
    for (std::size_t i = 0; i < n; ++i) plan.responds[i] = dropout_rng_.uniform() >= config_.dropout;
  }

  const double b = per_client_bytes();
  const auto per_miner = env_.clients_per_miner();
  std::vector<double> resp_per_miner(env_.n_miners(), 0.0);
  double resp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!plan.responds[i]) continue;
    resp += 1.0;
    resp_per_miner[env_.miner_of_client[i]] += 1.0;
  }
  const double omega = resp * b;
  plan.bytes.uploaded = omega;
  for (std::size_t j = 0; j < env_.n_miners(); ++j) {
    plan.bytes.crossed += (resp - resp_per_miner[j]) * b;
  }
  plan.bytes.downloaded = static_cast<double>(n) * omega;

  if (config_.mode == Mode::kAnalytic) {
    plan_analytic(plan);
  } else {
    plan_stochastic(plan);
  }
  plan.bytes.propagated = static_cast<double>(plan.mining.attempts) *
                          static_cast<double>(env_.n_miners() - 1) * omega;
  return plan;
}

void Simulation::plan_analytic(RoundPlan& plan) {
  plan.tau = timecost::round_terms(per_client_bytes(), config_.lambda, env_);
  plan.mining.winner = timecost::worst_case_winner(env_);
  plan.mining.attempts = 1;
  plan.mining.elapsed = plan.tau.mine;
  plan.mining.attempt_times = {plan.tau.mine};
  plan.mining.nonce = timing_rng_.next();
  plan.up_rates = env_.client_up;
  plan.down_rates = env_.client_down;
  plan.miner_rates = env_.miner_rate;
}

void Simulation::plan_stochastic(RoundPlan& plan) {
  const std::size_t n = config_.n_clients;
  const double jitter = env_.jitter;
  plan.up_rates.resize(n);
  plan.down_rates.resize(n);
  plan.miner_rates.resize(env_.n_miners());
  for (std::size_t i = 0; i < n; ++i) {
    plan.up_rates[i] = timecost::sample_link_rate(env_.client_up[i], jitter, timing_rng_);
  }
  for (std::size_t i = 0; i < n; ++i) {
    plan.down_rates[i] = timecost::sample_link_rate(env_.client_down[i], jitter, timing_rng_);
  }
  for (std::size_t j = 0; j < env_.n_miners(); ++j) {
    plan.miner_rates[j] = timecost::sample_link_rate(env_.miner_rate[j], jitter, timing_rng_);
  }

  const double b = per_client_bytes();
  std::vector<double> resp_per_miner(env_.n_miners(), 0.0);
  double resp = 0.0;
  plan.tau.local = env_.tau_local;
  plan.tau.aggre = env_.tau_aggre;
  for (std::size_t i = 0; i < n; ++i) {
    if (!plan.responds[i]) continue;
    resp += 1.0;
    resp_per_miner[env_.miner_of_client[i]] += 1.0;
    plan.tau.up = std::max(plan.tau.up, b / plan.up_rates[i]);
  }
  for (std::size_t j = 0; j < env_.n_miners(); ++j) {
    plan.tau.cross = std::max(plan.tau.cross, (resp - resp_per_miner[j]) * b / plan.miner_rates[j]);
  }
  const double omega = resp * b;

  chain::RaceOptions options;
  if (jitter > 0.0) {
    options.sampler = [this, jitter](std::uint32_t, double mean) {
      return timecost::sample_link_rate(mean, jitter, timing_rng_);
    };
  }
  if (config_.proof_of_work) {
    chain::ProofOfWork pow;
    pow.hash_rate = config_.hash_rate;
    const auto digest = chain::model_digest(w_);
    pow.header.assign(digest.begin(), digest.end());
    for (int i = 0; i < 8; ++i) pow.header.push_back(static_cast<std::uint8_t>(round_ >> (8 * i)));
    options.proof_of_work = std::move(pow);
  }
  plan.mining = chain::run_mining_race(env_.miner_rate, config_.lambda, omega, timing_rng_, options);
  plan.tau.mine = plan.mining.elapsed;
  for (std::size_t i = 0; i < n; ++i) {
    plan.tau.down = std::max(plan.tau.down, omega / plan.down_rates[i]);
  }
}

void Simulation::smooth_rates(const RoundPlan& plan) {
  const double a = config_.rate_smoothing;
  auto blend = [a](std::vector<double>& mean, const std::vector<double>& sample) {
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] = (1.0 - a) * mean[i] + a * sample[i];
  };
  blend(measured_.client_up, plan.up_rates);
  blend(measured_.client_down, plan.down_rates);
  blend(measured_.miner_rate, plan.miner_rates);
}

RoundRecord Simulation::execute(const RoundPlan& plan) {
  ++round_;
  const auto r = static_cast<std::uint32_t>(round_);
  const std::size_t n = config_.n_clients;
  LocalStep step{config_.epochs, config_.eta, config_.k, config_.value_bytes, config_.batch_size, r};

  std::vector<compression::SparseUpdate> updates;
  updates.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!plan.responds[i]) continue;
    std::optional<Rng> batch_rng;
    if (config_.batch_size > 0) batch_rng.emplace(derive_seed(batch_seed_, round_ * n + i));
    auto res = client_round(clients_[i], w_, *objectives_[i], step,
                            batch_rng ? &*batch_rng : nullptr);
    if (config_.record_gradient_norms) {
      grad_norms_.insert(grad_norms_.end(), res.gradient_norms_sq.begin(),
                         res.gradient_norms_sq.end());
    }
    clients_[i] = std::move(res.next);
    updates.push_back(std::move(res.sent));
  }

  w_ = aggregate(updates, w_, n, {.allow_missing = config_.dropout > 0.0});
  RoundRecord rec;
  for (auto& c : clients_) {
    c.w = w_;
    rec.max_residual_sq = std::max(rec.max_residual_sq, learning::squared_norm(c.m));
  }
  cum_time_ += plan.tau.total();

  chain::Block block;
  block.round = r;
  block.winner = plan.mining.winner;
  block.nonce = plan.mining.nonce;
  block.timestamp = cum_time_;
  block.n_clients = static_cast<std::uint32_t>(n);
  block.value_bytes = static_cast<std::uint32_t>(config_.value_bytes);
  block.model_digest = chain::model_digest(w_);
  block.updates = std::move(updates);
  rec.responders = block.updates.size();
  ledger_.append(std::move(block));

  rec.round = round_;
  rec.tau = plan.tau;
  rec.fork_attempts = plan.mining.attempts;
  rec.bytes = plan.bytes;
  rec.cum_time_s = cum_time_;
  rec.k = config_.k;
  rec.lambda = config_.lambda;
  rec.winner = plan.mining.winner;
  if (evaluator_) {
    const auto ev = evaluator_(w_);
    rec.test_loss = ev.loss;
    rec.test_acc = ev.accuracy;
  }
  if (config_.mode == Mode::kStochastic) smooth_rates(plan);
  return rec;
}

std::optional<RoundRecord> Simulation::run_round() {
  const RoundPlan plan = plan_round();
  if (cum_time_ + plan.tau.total() > config_.budget_s) return std::nullopt;
  return execute(plan);
}

ExperimentLog Simulation::run(const RoundHook& after_round) {
  ExperimentLog log;
  if (evaluator_) log.initial = evaluator_(w_);
  log.final = log.initial;
  while (auto rec = run_round()) {
    log.rounds.push_back(*rec);
    log.total_bytes += rec->bytes.total();
    log.final = {rec->test_loss, rec->test_acc};
    if (after_round) after_round(*this, *rec);
  }
  if (log.rounds.empty()) {
    log.warnings.push_back("budget " + format_real(config_.budget_s) +
                           " s is shorter than one round; no rounds completed");
  }
  log.final_model = w_;
  return log;
}

ExperimentLog run_experiment(const SystemConfig& config, const timecost::NetworkEnv& env,
                             std::vector<std::shared_ptr<const LocalObjective>> objectives,
                             ParamVector w0, Evaluator evaluator) {
  Simulation sim(config, env, std::move(objectives), std::move(w0), std::move(evaluator));
  return sim.run();
}

}  // namespace bcfl::protocol
