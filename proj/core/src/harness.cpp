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

#include "bcfl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "bcfl/chain.hpp"
#include "bcfl/error.hpp"
#include "bcfl/kv.hpp"

namespace bcfl::harness {
namespace {

using nlohmann::ordered_json;

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_real(v[i]);
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string real_or_auto(const std::optional<double>& v) { return v ? format_real(*v) : "auto"; }

std::size_t k_from_fraction(double fraction, std::size_t d) {
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(d)));
  return std::clamp<std::size_t>(k, 1, d);
}

std::size_t per_client_samples(const ExperimentConfig& cfg) {
  return cfg.data.total_samples > 0 ? cfg.data.total_samples / cfg.n_clients
                                    : cfg.data.per_client;
}

ordered_json trace_json(const optimizer::AcsSolution& s) {
  ordered_json trace = ordered_json::array();
  for (const auto& t : s.trace) {
    const char* axis = t.axis == optimizer::Axis::kStart ? "start"
                       : t.axis == optimizer::Axis::kK  ? "k"
                                                        : "lambda";
    trace.push_back({{"sweep", t.sweep},
                     {"axis", axis},
                     {"k", t.k},
                     {"lambda", t.lambda},
                     {"objective", t.objective}});
  }
  return {{"k_star_real", s.k_star_real},
          {"k_star_int", s.k_star_int},
          {"lambda_star", s.lambda_star},
          {"objective", s.objective},
          {"objective_int", s.objective_int},
          {"sweeps", s.sweeps},
          {"converged", s.converged},
          {"trace", trace}};
}

ordered_json params_json(const convergence::ConvergenceParams& p) {
  return {{"L", p.L},   {"G2", p.G2}, {"Gamma2", p.Gamma2}, {"sigma2", p.sigma2}, {"gap", p.gap},
          {"C", p.C},   {"E", p.E},   {"b", p.b},           {"N", p.N}};
}

double best_accuracy(const protocol::ExperimentLog& log) {
  double best = log.initial.accuracy;
  for (const auto& r : log.rounds) best = std::max(best, r.test_acc);
  return best;
}

SweepRow to_row(const std::string& label, double fraction, const RunResult& run) {
  SweepRow row;
  row.label = label;
  row.k_fraction = fraction;
  row.n_clients = run.config.n_clients;
  row.k = run.plan.k;
  row.lambda = run.plan.lambda;
  row.rounds = run.log.completed_rounds();
  row.final_loss = run.log.final.loss;
  row.final_acc = run.log.final.accuracy;
  row.total_bytes = run.log.total_bytes;
  row.sim_time_s = run.log.rounds.empty() ? 0.0 : run.log.rounds.back().cum_time_s;
  return row;
}

std::optional<std::filesystem::path> subdir(const std::optional<std::filesystem::path>& out,
                                            const std::string& name) {
  if (!out) return std::nullopt;
  return *out / name;
}

}  // namespace

void ExperimentConfig::validate() const {
  require(data.source == "synthetic" || data.source == "csv", ErrorKind::kConfig,
          "data_source must be synthetic or csv");
  require(data.source != "csv" || !data.path.empty(), ErrorKind::kConfig,
          "data_source = csv needs data_path");
  require(data.feature_dim >= 1 && data.label_count >= 2, ErrorKind::kConfig,
          "need at least one feature and two labels");
  require(data.labels_per_client >= 1 && data.labels_per_client <= data.label_count,
          ErrorKind::kConfig, "labels_per_client must lie in [1, label_count]");
  require(data.test_fraction > 0.0 && data.test_fraction < 1.0, ErrorKind::kConfig,
          "test_fraction must lie in (0, 1)");
  require(data.noise >= 0.0 && data.center_scale >= 0.0, ErrorKind::kConfig,
          "noise and center_scale must be non-negative");
  require(n_clients >= 1 && n_miners >= 1, ErrorKind::kConfig, "N and M must be at least 1");
  require(per_client_samples(*this) >= 1, ErrorKind::kConfig, "each client needs a sample");
  require(epochs >= 1, ErrorKind::kConfig, "epochs must be at least 1");
  require(eta > 0.0 && C > 0.0, ErrorKind::kConfig, "eta and C must be positive");
  for (auto w : hidden) require(w >= 1, ErrorKind::kConfig, "hidden widths must be positive");
  require(!k_fraction || (*k_fraction > 0.0 && *k_fraction <= 1.0), ErrorKind::kConfig,
          "k_fraction must lie in (0, 1]");
  require(!lambda || *lambda > 0.0, ErrorKind::kConfig, "lambda must be positive");
  require(value_bytes == 4 || value_bytes == 8, ErrorKind::kConfig, "s_bytes must be 4 or 8");
  require(link.bw_hz > 0.0 && link.gain > 0.0 && link.p_t_w > 0.0 && link.p_n_w > 0.0,
          ErrorKind::kConfig, "link parameters must be positive");
  require(jitter >= 0.0 && tau_local_s >= 0.0 && tau_aggre_s >= 0.0, ErrorKind::kConfig,
          "jitter and compute times must be non-negative");
  require(!budget_s || *budget_s > 0.0, ErrorKind::kConfig, "budget_s must be positive");
  require(budget_rounds > 0.0, ErrorKind::kConfig, "budget_rounds must be positive");
  require(!baselines.empty(), ErrorKind::kConfig, "baselines must not be empty");
  for (double f : baselines) {
    require(f > 0.0 && f <= 1.0, ErrorKind::kConfig, "baseline fractions must lie in (0, 1]");
  }
  for (double f : sweep_k) {
    require(f > 0.0 && f <= 1.0, ErrorKind::kConfig, "sweep_k fractions must lie in (0, 1]");
  }
  for (auto n : sweep_clients) require(n >= 1, ErrorKind::kConfig, "sweep_clients must be >= 1");
  require(dropout >= 0.0 && dropout < 1.0, ErrorKind::kConfig, "dropout must lie in [0, 1)");
  require(rate_smoothing > 0.0 && rate_smoothing <= 1.0, ErrorKind::kConfig,
          "rate_smoothing must lie in (0, 1]");
  require(hash_rate > 0.0, ErrorKind::kConfig, "hash_rate must be positive");
  require(probe_k_fraction > 0.0 && probe_k_fraction <= 1.0, ErrorKind::kConfig,
          "probe_k_fraction must lie in (0, 1]");
  require(lambda_min > 0.0 && lambda_min < lambda_max, ErrorKind::kConfig,
          "need 0 < lambda_min < lambda_max");
  require(!target_accuracy || (*target_accuracy >= 0.0 && *target_accuracy <= 1.0),
          ErrorKind::kConfig, "target_accuracy must lie in [0, 1]");
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream o;
  o << "# run\n"
    << "seed = " << seed << "\n"
    << "mode = " << protocol::to_string(mode) << "\n"
    << "\n# data\n"
    << "data_source = " << data.source << "\n"
    << "data_path = " << data.path << "\n"
    << "feature_dim = " << data.feature_dim << "\n"
    << "label_count = " << data.label_count << "\n"
    << "per_client = " << data.per_client << "\n"
    << "total_samples = " << data.total_samples << "\n"
    << "labels_per_client = " << data.labels_per_client << "\n"
    << "test_size = " << data.test_size << "\n"
    << "center_scale = " << format_real(data.center_scale) << "\n"
    << "noise = " << format_real(data.noise) << "\n"
    << "test_fraction = " << format_real(data.test_fraction) << "\n"
    << "\n# model and training\n"
    << "hidden = " << (hidden.empty() ? "none" : join(hidden)) << "\n"
    << "activation = " << learning::to_string(activation) << "\n"
    << "n_clients = " << n_clients << "\n"
    << "n_miners = " << n_miners << "\n"
    << "epochs = " << epochs << "\n"
    << "eta = " << format_real(eta) << "\n"
    << "batch_size = " << batch_size << "\n"
    << "C = " << format_real(C) << "\n"
    << "\n# compression and mining\n"
    << "k_fraction = " << real_or_auto(k_fraction) << "\n"
    << "lambda = " << real_or_auto(lambda) << "\n"
    << "s_bytes = " << value_bytes << "\n"
    << "lambda_min = " << format_real(lambda_min) << "\n"
    << "lambda_max = " << format_real(lambda_max) << "\n"
    << "probe_k_fraction = " << format_real(probe_k_fraction) << "\n"
    << "proof_of_work = " << (proof_of_work ? "true" : "false") << "\n"
    << "hash_rate = " << format_real(hash_rate) << "\n"
    << "\n# network\n"
    << "bw_hz = " << format_real(link.bw_hz) << "\n"
    << "gain = " << format_real(link.gain) << "\n"
    << "p_t_w = " << format_real(link.p_t_w) << "\n"
    << "p_n_w = " << format_real(link.p_n_w) << "\n"
    << "jitter = " << format_real(jitter) << "\n"
    << "tau_local_s = " << format_real(tau_local_s) << "\n"
    << "tau_aggre_s = " << format_real(tau_aggre_s) << "\n"
    << "rate_smoothing = " << format_real(rate_smoothing) << "\n"
    << "reoptimize_every = " << reoptimize_every << "\n"
    << "\n# experiment\n"
    << "budget_s = " << real_or_auto(budget_s) << "\n"
    << "budget_rounds = " << format_real(budget_rounds) << "\n"
    << "dropout = " << format_real(dropout) << "\n"
    << "baselines = " << join(baselines) << "\n"
    << "target_accuracy = " << real_or_auto(target_accuracy) << "\n"
    << "sweep_k = " << join(sweep_k) << "\n"
    << "sweep_clients = " << join(sweep_clients) << "\n";
  return o.str();
}

ExperimentConfig ExperimentConfig::from_map(const std::map<std::string, std::string>& kv) {
  KeyValueReader r(kv);
  ExperimentConfig c;
  c.seed = r.count("seed", c.seed);
  c.mode = protocol::parse_mode(r.text("mode", protocol::to_string(c.mode)));
  c.data.source = r.text("data_source", c.data.source);
  c.data.path = r.text("data_path", c.data.path);
  c.data.feature_dim = r.count("feature_dim", c.data.feature_dim);
  c.data.label_count = r.count("label_count", c.data.label_count);
  c.data.per_client = r.count("per_client", c.data.per_client);
  c.data.total_samples = r.count("total_samples", c.data.total_samples);
  c.data.labels_per_client = r.count("labels_per_client", c.data.labels_per_client);
  c.data.test_size = r.count("test_size", c.data.test_size);
  c.data.center_scale = r.real("center_scale", c.data.center_scale);
  c.data.noise = r.real("noise", c.data.noise);
  c.data.test_fraction = r.real("test_fraction", c.data.test_fraction);
  if (r.text("hidden", "") == "none") {
    c.hidden.clear();
  } else {
    c.hidden = r.counts("hidden", c.hidden);
  }
  c.activation = learning::parse_activation(r.text("activation", learning::to_string(c.activation)));
  c.n_clients = r.count("n_clients", c.n_clients);
  c.n_miners = r.count("n_miners", c.n_miners);
  c.epochs = r.count("epochs", c.epochs);
  c.eta = r.real("eta", c.eta);
  c.batch_size = r.count("batch_size", c.batch_size);
  c.C = r.real("C", c.C);
  c.k_fraction = r.real_or_auto("k_fraction", c.k_fraction);
  c.lambda = r.real_or_auto("lambda", c.lambda);
  c.value_bytes = r.count("s_bytes", c.value_bytes);
  c.lambda_min = r.real("lambda_min", c.lambda_min);
  c.lambda_max = r.real("lambda_max", c.lambda_max);
  c.probe_k_fraction = r.real("probe_k_fraction", c.probe_k_fraction);
  c.proof_of_work = r.flag("proof_of_work", c.proof_of_work);
  c.hash_rate = r.real("hash_rate", c.hash_rate);
  c.link.bw_hz = r.real("bw_hz", c.link.bw_hz);
  c.link.gain = r.real("gain", c.link.gain);
  c.link.p_t_w = r.real("p_t_w", c.link.p_t_w);
  c.link.p_n_w = r.real("p_n_w", c.link.p_n_w);
  c.jitter = r.real("jitter", c.jitter);
  c.tau_local_s = r.real("tau_local_s", c.tau_local_s);
  c.tau_aggre_s = r.real("tau_aggre_s", c.tau_aggre_s);
  c.rate_smoothing = r.real("rate_smoothing", c.rate_smoothing);
  c.reoptimize_every = r.count("reoptimize_every", c.reoptimize_every);
  c.budget_s = r.real_or_auto("budget_s", c.budget_s);
  c.budget_rounds = r.real("budget_rounds", c.budget_rounds);
  c.dropout = r.real("dropout", c.dropout);
  c.baselines = r.reals("baselines", c.baselines);
  c.target_accuracy = r.real_or_auto("target_accuracy", c.target_accuracy);
  c.sweep_k = r.reals("sweep_k", c.sweep_k);
  c.sweep_clients = r.counts("sweep_clients", c.sweep_clients);
  r.reject_unknown();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_map(read_key_values(path));
}

ExperimentConfig ExperimentConfig::with_overrides(const std::vector<std::string>& assignments) const {
  auto kv = parse_key_values(to_text(), "<config>");
  for (const auto& a : assignments) {
    const auto parsed = parse_key_values(a, "<override>");
    require(parsed.size() == 1, ErrorKind::kConfig, "override '" + a + "' is not key=value");
    for (const auto& [key, value] : parsed) kv[key] = value;
  }
  return from_map(kv);
}

protocol::Evaluator Workload::evaluator() const {
  return [this](std::span<const double> w) { return learning::evaluate(arch, w, data.test_set); };
}

protocol::SystemConfig Workload::system(const ExperimentConfig& cfg, std::size_t k, double lambda,
                                        double budget_s) const {
  protocol::SystemConfig s;
  s.n_clients = cfg.n_clients;
  s.n_miners = cfg.n_miners;
  s.epochs = cfg.epochs;
  s.eta = cfg.eta;
  s.batch_size = cfg.batch_size;
  s.k = k;
  s.lambda = lambda;
  s.budget_s = budget_s;
  s.value_bytes = cfg.value_bytes;
  s.seed = cfg.seed;
  s.mode = cfg.mode;
  s.dropout = cfg.dropout;
  s.proof_of_work = cfg.proof_of_work;
  s.hash_rate = cfg.hash_rate;
  s.rate_smoothing = cfg.rate_smoothing;
  return s;
}

std::unique_ptr<Workload> build_workload(const ExperimentConfig& cfg) {
  cfg.validate();
  auto work = std::make_unique<Workload>();
  if (cfg.data.source == "synthetic") {
    learning::GenerationSpec g;
    g.clients = cfg.n_clients;
    g.per_client = per_client_samples(cfg);
    g.labels_per_client = cfg.data.labels_per_client;
    g.label_count = cfg.data.label_count;
    g.feature_dim = cfg.data.feature_dim;
    g.test_size = cfg.data.test_size;
    g.center_scale = cfg.data.center_scale;
    g.noise = cfg.data.noise;
    g.seed = derive_seed(cfg.seed, 1);
    work->data = learning::generate_federated(g);
  } else {
    learning::PartitionSpec p;
    p.clients = cfg.n_clients;
    p.per_client = per_client_samples(cfg);
    p.labels_per_client = cfg.data.labels_per_client;
    p.label_count = cfg.data.label_count;
    p.seed = derive_seed(cfg.seed, 1);
    work->data = learning::load_federated_csv(cfg.data.path, p, cfg.data.test_fraction);
  }
  work->arch.input_dim = work->data.test_set.feature_dim;
  work->arch.hidden_widths = cfg.hidden;
  work->arch.num_classes = work->data.label_count;
  work->arch.activation = cfg.activation;
  work->arch.validate();
  work->w0 = learning::init_model(work->arch, derive_seed(cfg.seed, 2));
  for (const auto& client : work->data.clients) {
    work->objectives.push_back(std::make_shared<protocol::MlpObjective>(work->arch, client));
  }
  work->env = timecost::NetworkEnv::homogeneous(
      cfg.n_clients, cfg.n_miners, cfg.link.rate_bytes_per_s(), work->dim(),
      static_cast<double>(cfg.value_bytes), cfg.tau_local_s, cfg.tau_aggre_s, cfg.jitter);
  return work;
}

double round_time(const timecost::NetworkEnv& env, std::size_t k, double lambda) {
  return timecost::round_terms(compression::transmitted_bytes(k, env.d, env.s), lambda, env)
      .total();
}

double best_lambda_for_round_time(const timecost::NetworkEnv& env, std::size_t k, double lo,
                                  double hi) {
  return optimizer::minimize_1d_log([&](double l) { return round_time(env, k, l); }, lo, hi,
                                    1e-10);
}

convergence::ConvergenceParams estimate(const ExperimentConfig& cfg, const Workload& work) {
  protocol::LocalStep step;
  step.epochs = cfg.epochs;
  step.eta = cfg.eta;
  step.k = k_from_fraction(cfg.probe_k_fraction, work.dim());
  step.value_bytes = cfg.value_bytes;
  step.batch_size = cfg.batch_size;
  const auto obs =
      convergence::observe_first_round(work.objectives, work.w0, step, derive_seed(cfg.seed, 3));
  return convergence::estimate_params(obs, cfg.C, cfg.epochs, cfg.batch_size);
}

optimizer::Objective make_objective(const Plan& plan, const timecost::NetworkEnv& env,
                                    const ExperimentConfig& cfg, std::size_t d) {
  if (cfg.lambda) {
    return optimizer::Objective::from_model(plan.bound, timecost::h_coefficients(env), d,
                                            plan.budget_s, *cfg.lambda, *cfg.lambda);
  }
  return optimizer::Objective::from_model(plan.bound, timecost::h_coefficients(env), d,
                                          plan.budget_s, cfg.lambda_min, cfg.lambda_max);
}

Plan make_plan(const ExperimentConfig& cfg, const Workload& work) {
  const std::size_t d = work.dim();
  Plan plan;
  plan.params = estimate(cfg, work);
  plan.bound = convergence::bound_coefficients(plan.params);
  plan.hcoef = timecost::h_coefficients(work.env);
  plan.lambda_uncompressed =
      best_lambda_for_round_time(work.env, d, cfg.lambda_min, cfg.lambda_max);
  plan.budget_s = cfg.budget_s ? *cfg.budget_s
                               : cfg.budget_rounds *
                                     round_time(work.env, d, cfg.lambda.value_or(plan.lambda_uncompressed));

  if (cfg.k_fraction) {
    plan.k = k_from_fraction(*cfg.k_fraction, d);
    plan.lambda = cfg.lambda ? *cfg.lambda
                             : best_lambda_for_round_time(work.env, plan.k, cfg.lambda_min,
                                                          cfg.lambda_max);
    return plan;
  }
  const auto obj = make_objective(plan, work.env, cfg, d);
  const double k0 = static_cast<double>(k_from_fraction(cfg.probe_k_fraction, d));
  plan.solution = optimizer::acs_solve(obj, k0, optimizer::best_lambda_for_k(obj, k0));
  plan.k = plan.solution->k_star_int;
  plan.lambda = plan.solution->lambda_star;
  return plan;
}

RunResult run_simulation(const ExperimentConfig& cfg,
                         const std::optional<std::filesystem::path>& out_dir) {
  const auto work = build_workload(cfg);
  RunResult result;
  result.config = cfg;
  result.d = work->dim();
  result.plan = make_plan(cfg, *work);
  const Plan& plan = result.plan;

  protocol::Simulation sim(work->system(cfg, plan.k, plan.lambda, plan.budget_s), work->env,
                           work->objectives, work->w0, work->evaluator());
  const bool adaptive = cfg.mode == protocol::Mode::kStochastic && plan.solution &&
                        cfg.reoptimize_every > 0;
  protocol::Simulation::RoundHook hook;
  if (adaptive) {
    hook = [&](protocol::Simulation& s, const protocol::RoundRecord& rec) {
      if (rec.round % cfg.reoptimize_every != 0) return;
      const auto obj = make_objective(plan, s.measured_env(), cfg, result.d);
      const auto& prev = result.reoptimizations.empty() ? *plan.solution
                                                        : result.reoptimizations.back().solution;
      auto next = optimizer::reoptimize(obj, prev);
      s.set_operating_point(next.k_star_int, next.lambda_star);
      result.reoptimizations.push_back({rec.round, std::move(next)});
    };
  }
  result.log = sim.run(hook);
  result.final_digest = chain::to_hex(chain::model_digest(result.log.final_model));
  result.ledger_blocks = sim.ledger().size();

  if (!out_dir) return result;
  std::filesystem::create_directories(*out_dir);

  std::string csv = protocol::metrics_csv_header() + "\n";
  for (const auto& r : result.log.rounds) csv += protocol::metrics_csv_row(r) + "\n";
  write_text(*out_dir / "metrics.csv", csv);

  sim.ledger().write(*out_dir / "ledger.chain");

  ordered_json trace;
  if (plan.solution) {
    trace["initial"] = trace_json(*plan.solution);
  } else {
    trace["initial"] = {{"fixed", true}, {"k", plan.k}, {"lambda", plan.lambda}};
  }
  trace["reoptimizations"] = ordered_json::array();
  for (const auto& re : result.reoptimizations) {
    auto entry = trace_json(re.solution);
    entry["after_round"] = re.after_round;
    trace["reoptimizations"].push_back(entry);
  }
  write_text(*out_dir / "solution_trace.json", trace.dump(2) + "\n");

  ordered_json config_echo = ordered_json::object();
  for (const auto& [key, value] : parse_key_values(cfg.to_text())) config_echo[key] = value;
  double max_residual = 0.0;
  for (const auto& r : result.log.rounds) max_residual = std::max(max_residual, r.max_residual_sq);
  ordered_json summary = {
      {"seed", cfg.seed},
      {"mode", protocol::to_string(cfg.mode)},
      {"d", result.d},
      {"k", plan.k},
      {"lambda", plan.lambda},
      {"budget_s", plan.budget_s},
      {"rounds", result.log.completed_rounds()},
      {"sim_time_s", result.log.rounds.empty() ? 0.0 : result.log.rounds.back().cum_time_s},
      {"initial_loss", result.log.initial.loss},
      {"initial_accuracy", result.log.initial.accuracy},
      {"final_loss", result.log.final.loss},
      {"final_accuracy", result.log.final.accuracy},
      {"total_bytes", result.log.total_bytes},
      {"final_model_sha256", result.final_digest},
      {"ledger_blocks", result.ledger_blocks},
      {"max_residual_sq", max_residual},
      {"convergence", params_json(plan.params)},
      {"bound", {{"lambda_a", plan.bound.lambda_a}, {"lambda_b", plan.bound.lambda_b}}},
      {"h_coefficients",
       {{"omega", plan.hcoef.omega},
        {"tau_fixed", plan.hcoef.tau_fixed},
        {"lambda_t", plan.hcoef.lambda_t},
        {"lambda_p", plan.hcoef.lambda_p},
        {"fork_per_lambda", plan.hcoef.fork_per_lambda}}},
      {"warnings", result.log.warnings},
      {"config", config_echo}};
  write_text(*out_dir / "summary.json", summary.dump(2) + "\n");
  return result;
}

std::vector<SweepRow> sweep_k(const ExperimentConfig& cfg, const std::vector<double>& fractions,
                              const std::optional<std::filesystem::path>& out_dir) {
  std::vector<SweepRow> rows;
  for (double f : fractions) {
    ExperimentConfig arm = cfg;
    arm.k_fraction = f;
    const std::string label = "k_" + format_real(f);
    rows.push_back(to_row(label, f, run_simulation(arm, subdir(out_dir, label))));
  }
  if (out_dir) write_text(*out_dir / "sweep.csv", sweep_csv(rows));
  return rows;
}

std::vector<SweepRow> sweep_clients(const ExperimentConfig& cfg,
                                    const std::vector<std::size_t>& counts,
                                    const std::optional<std::filesystem::path>& out_dir) {
  std::vector<SweepRow> rows;
  const std::size_t total = cfg.n_clients * per_client_samples(cfg);
  for (auto n : counts) {
    ExperimentConfig arm = cfg;
    arm.n_clients = n;
    arm.n_miners = n;
    arm.data.total_samples = total;
    const std::string label = "n_" + std::to_string(n);
    rows.push_back(to_row(label, arm.k_fraction.value_or(0.0),
                          run_simulation(arm, subdir(out_dir, label))));
  }
  if (out_dir) write_text(*out_dir / "sweep.csv", sweep_csv(rows));
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "label,k_fraction,n_clients,k,lambda,rounds,final_loss,final_acc,total_bytes,sim_time_s\n";
  for (const auto& r : rows) {
    out += r.label + "," + format_real(r.k_fraction) + "," + std::to_string(r.n_clients) + "," +
           std::to_string(r.k) + "," + format_real(r.lambda) + "," + std::to_string(r.rounds) +
           "," + format_real(r.final_loss) + "," + format_real(r.final_acc) + "," +
           format_real(r.total_bytes) + "," + format_real(r.sim_time_s) + "\n";
  }
  return out;
}

std::optional<double> time_to_accuracy(const protocol::ExperimentLog& log, double target) {
  if (log.initial.accuracy >= target) return 0.0;
  for (const auto& r : log.rounds) {
    if (r.test_acc >= target) return r.cum_time_s;
  }
  return std::nullopt;
}

Comparison run_comparison(const ExperimentConfig& cfg,
                          const std::optional<std::filesystem::path>& out_dir) {
  std::vector<std::pair<std::string, ExperimentConfig>> arms;
  ExperimentConfig opt = cfg;
  opt.k_fraction.reset();
  arms.emplace_back("optimized", opt);
  std::vector<double> fractions = cfg.baselines;
  std::sort(fractions.begin(), fractions.end());
  fractions.erase(std::unique(fractions.begin(), fractions.end()), fractions.end());
  if (fractions.back() != 1.0) fractions.push_back(1.0);
  for (double f : fractions) {
    ExperimentConfig arm = cfg;
    arm.k_fraction = f;
    arms.emplace_back(f == 1.0 ? "uncompressed" : "top_k_" + format_real(f), arm);
  }

  std::vector<RunResult> runs;
  for (const auto& [label, arm] : arms) runs.push_back(run_simulation(arm, subdir(out_dir, label)));

  Comparison c;
  const auto& base = runs.back();
  c.target_accuracy = cfg.target_accuracy.value_or(best_accuracy(base.log));
  const auto base_time = time_to_accuracy(base.log, c.target_accuracy);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& run = runs[i];
    ComparisonRow row;
    row.strategy = arms[i].first;
    row.k = run.plan.k;
    row.lambda = run.plan.lambda;
    row.comm_rate = static_cast<double>(run.d) / static_cast<double>(run.plan.k);
    row.rounds = run.log.completed_rounds();
    row.total_bytes = run.log.total_bytes;
    row.bytes_per_round = row.rounds ? row.total_bytes / static_cast<double>(row.rounds) : 0.0;
    row.final_loss = run.log.final.loss;
    row.final_acc = run.log.final.accuracy;
    row.best_acc = best_accuracy(run.log);
    row.time_to_target = time_to_accuracy(run.log, c.target_accuracy);
    if (row.time_to_target && base_time && *base_time > 0.0) {
      row.reduced_to = *row.time_to_target / *base_time;
    }
    c.rows.push_back(row);
  }
  if (out_dir) write_text(*out_dir / "comparison.csv", comparison_csv(c));
  return c;
}

std::string comparison_csv(const Comparison& c) {
  auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : "unreached"; };
  std::string out =
      "strategy,k,comm_rate,lambda,rounds,total_bytes,bytes_per_round,final_loss,final_acc,"
      "best_acc,target_acc,time_to_target_s,reduced_to\n";
  for (const auto& r : c.rows) {
    out += r.strategy + "," + std::to_string(r.k) + "," + format_real(r.comm_rate) + "," +
           format_real(r.lambda) + "," + std::to_string(r.rounds) + "," +
           format_real(r.total_bytes) + "," + format_real(r.bytes_per_round) + "," +
           format_real(r.final_loss) + "," + format_real(r.final_acc) + "," +
           format_real(r.best_acc) + "," + format_real(c.target_accuracy) + "," +
           opt(r.time_to_target) + "," + opt(r.reduced_to) + "\n";
  }
  return out;
}

std::string params_to_json(const convergence::ConvergenceParams& p) {
  return params_json(p).dump(2) + "\n";
}

convergence::ConvergenceParams params_from_json(const std::string& text) {
  convergence::ConvergenceParams p;
  try {
    const auto j = nlohmann::json::parse(text);
    p.L = j.at("L").get<double>();
    p.G2 = j.at("G2").get<double>();
    p.Gamma2 = j.at("Gamma2").get<double>();
    p.gap = j.at("gap").get<double>();
    p.C = j.value("C", p.C);
    p.E = j.value("E", p.E);
    p.b = j.value("b", p.b);
    p.N = j.value("N", p.N);
    if (j.contains("sigma2")) p.sigma2 = j.at("sigma2").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, std::string("convergence parameters JSON: ") + e.what());
  }
  p.validate();
  return p;
}

std::string solution_to_json(const optimizer::AcsSolution& s) {
  return trace_json(s).dump(2) + "\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  require(out.good(), ErrorKind::kIo, "failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kIo, "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace bcfl::harness
