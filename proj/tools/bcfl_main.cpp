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

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bcfl/chain.hpp"
#include "bcfl/error.hpp"
#include "bcfl/harness.hpp"
#include "bcfl/kv.hpp"
#include "bcfl/optimizer.hpp"
#include "bcfl/timecost.hpp"

namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;
using namespace bcfl;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIntegrity = 3;

int report(const std::string& kind, const std::string& message, int code) {
  std::cerr << ordered_json{{"error", kind}, {"message", message}}.dump() << std::endl;
  return code;
}

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "bcfl_out";
  std::string mode;
  std::vector<std::string> overrides;
  bool print_default = false;
};

harness::ExperimentConfig load_config(const Globals& g) {
  harness::ExperimentConfig cfg;
  if (!g.config_path.empty()) cfg = harness::ExperimentConfig::load(g.config_path);
  std::vector<std::string> sets = g.overrides;
  if (g.seed) sets.push_back("seed=" + std::to_string(*g.seed));
  if (!g.mode.empty()) sets.push_back("mode=" + g.mode);
  return sets.empty() ? cfg : cfg.with_overrides(sets);
}

int cmd_simulate(const Globals& g) {
  const auto cfg = load_config(g);
  const auto run = harness::run_simulation(cfg, fs::path(g.out));
  ordered_json j = {{"rounds", run.log.completed_rounds()},
                    {"k", run.plan.k},
                    {"lambda", run.plan.lambda},
                    {"budget_s", run.plan.budget_s},
                    {"final_loss", run.log.final.loss},
                    {"final_accuracy", run.log.final.accuracy},
                    {"total_bytes", run.log.total_bytes},
                    {"final_model_sha256", run.final_digest},
                    {"out", g.out}};
  for (const auto& w : run.log.warnings) std::cerr << ordered_json{{"warning", w}}.dump() << "\n";
  std::cout << j.dump(2) << std::endl;
  return 0;
}

int cmd_estimate(const Globals& g, bool write_out) {
  const auto cfg = load_config(g);
  const auto work = harness::build_workload(cfg);
  const auto params = harness::estimate(cfg, *work);
  const auto text = harness::params_to_json(params);
  if (write_out) {
    fs::create_directories(g.out);
    harness::write_text(fs::path(g.out) / "convergence.json", text);
  }
  std::cout << text;
  return 0;
}

struct OptimizeArgs {
  std::string params_path;
  std::string env_path;
  std::optional<double> budget;
  std::string grid_path;
  std::size_t grid_size = 200;
};

int cmd_optimize(const Globals& g, const OptimizeArgs& a) {
  const auto cfg = load_config(g);
  timecost::NetworkEnv env;
  std::unique_ptr<harness::Workload> work;
  if (!a.env_path.empty()) {
    env = timecost::load_env_file(a.env_path).to_env();
  } else {
    work = harness::build_workload(cfg);
    env = work->env;
  }
  harness::Plan plan;
  if (!a.params_path.empty()) {
    plan.params = harness::params_from_json(harness::read_text(a.params_path));
  } else {
    if (!work) work = harness::build_workload(cfg);
    plan.params = harness::estimate(cfg, *work);
  }
  plan.bound = convergence::bound_coefficients(plan.params);
  const std::size_t d = env.d;
  const double lambda_u = harness::best_lambda_for_round_time(env, d, cfg.lambda_min, cfg.lambda_max);
  plan.budget_s = a.budget ? *a.budget
                  : cfg.budget_s ? *cfg.budget_s
                                 : cfg.budget_rounds * harness::round_time(env, d, lambda_u);
  const auto obj = harness::make_objective(plan, env, cfg, d);
  const double k0 = std::max(1.0, std::round(cfg.probe_k_fraction * static_cast<double>(d)));
  const auto sol = optimizer::acs_solve(obj, k0, optimizer::best_lambda_for_k(obj, k0));
  if (!a.grid_path.empty()) {
    const auto ks = optimizer::log_grid(obj.box().k_lo, obj.box().k_hi, a.grid_size);
    const auto ls = obj.box().lambda_lo < obj.box().lambda_hi
                        ? optimizer::log_grid(obj.box().lambda_lo, obj.box().lambda_hi, a.grid_size)
                        : std::vector<double>{obj.box().lambda_lo};
    harness::write_text(a.grid_path, optimizer::grid_csv(obj, ks, ls));
  }
  ordered_json j = {{"k_star_real", sol.k_star_real},
                    {"k_star_int", sol.k_star_int},
                    {"lambda_star", sol.lambda_star},
                    {"objective", sol.objective_int},
                    {"sweeps", sol.sweeps},
                    {"converged", sol.converged},
                    {"d", d},
                    {"budget_s", plan.budget_s},
                    {"lambda_a", plan.bound.lambda_a},
                    {"lambda_b", plan.bound.lambda_b}};
  std::cout << j.dump(2) << std::endl;
  return 0;
}

int cmd_sweep(const Globals& g, const std::vector<double>& k_list,
              const std::vector<std::size_t>& clients_list) {
  const auto cfg = load_config(g);
  std::vector<harness::SweepRow> rows;
  if (!clients_list.empty()) {
    rows = harness::sweep_clients(cfg, clients_list, fs::path(g.out));
  } else {
    rows = harness::sweep_k(cfg, k_list.empty() ? cfg.sweep_k : k_list, fs::path(g.out));
  }
  std::cout << harness::sweep_csv(rows);
  return 0;
}

int cmd_compare(const Globals& g) {
  const auto cfg = load_config(g);
  const auto c = harness::run_comparison(cfg, fs::path(g.out));
  std::cout << harness::comparison_csv(c);
  return 0;
}

int cmd_verify(const std::string& ledger) {
  std::vector<double> model;
  const auto rep = chain::verify_chain_file(ledger, &model);
  if (!rep.ok) {
    std::cerr << ordered_json{{"error", "integrity"},
                              {"height", rep.bad_height},
                              {"field", rep.field},
                              {"message", rep.message}}
                     .dump()
              << std::endl;
    return kExitIntegrity;
  }
  std::cout << ordered_json{{"ok", true},
                            {"final_model_sha256", chain::to_hex(chain::model_digest(model))}}
                   .dump(2)
            << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blockchain federated learning simulator with Top-k compression"};
  app.require_subcommand(0, 1);
  Globals g;
  app.add_option("--config", g.config_path, "Experiment config (key = value)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Master seed");
  auto* out_opt = app.add_option("--out", g.out, "Output directory");
  app.add_option("--mode", g.mode, "Timing mode")->check(CLI::IsMember({"analytic", "stochastic"}));
  app.add_option("--set", g.overrides, "Override a config key, KEY=VALUE (repeatable)");
  app.add_flag("--print-default-config", g.print_default, "Print the default config and exit");

  auto* simulate = app.add_subcommand("simulate", "Run one experiment");
  auto* estimate = app.add_subcommand("estimate", "Estimate convergence constants from one round");

  OptimizeArgs opt;
  auto* optimize = app.add_subcommand("optimize", "Solve for (k*, lambda*)");
  optimize->add_option("--params", opt.params_path, "Convergence parameters JSON")
      ->check(CLI::ExistingFile);
  optimize->add_option("--env", opt.env_path, "Environment file")->check(CLI::ExistingFile);
  optimize->add_option("--budget", opt.budget, "Training time budget Y in seconds");
  optimize->add_option("--grid", opt.grid_path, "Write the objective grid as CSV");
  optimize->add_option("--grid-size", opt.grid_size, "Grid points per axis")
      ->check(CLI::Range(3, 2000));

  std::vector<double> k_list;
  std::vector<std::size_t> clients_list;
  auto* sweep = app.add_subcommand("sweep", "Run one arm per k fraction or client count");
  sweep->add_option("--k-list", k_list, "Fractions of d")->delimiter(',');
  sweep->add_option("--clients-list", clients_list, "Client counts")->delimiter(',');

  auto* compare = app.add_subcommand("compare", "Optimised arm against fixed-k baselines");

  std::string ledger;
  auto* verify = app.add_subcommand("verify-chain", "Verify a ledger file");
  verify->add_option("--ledger", ledger, "Ledger file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage", e.what(), kExitUsage);
  }

  try {
    if (g.print_default) {
      std::cout << harness::ExperimentConfig{}.to_text();
      return 0;
    }
    if (simulate->parsed()) return cmd_simulate(g);
    if (estimate->parsed()) return cmd_estimate(g, out_opt->count() > 0);
    if (optimize->parsed()) return cmd_optimize(g, opt);
    if (sweep->parsed()) return cmd_sweep(g, k_list, clients_list);
    if (compare->parsed()) return cmd_compare(g);
    if (verify->parsed()) return cmd_verify(ledger);
    return report("usage", "a subcommand is required\n" + app.help(), kExitUsage);
  } catch (const Error& e) {
    const bool usage = e.kind() == ErrorKind::kConfig;
    return report(std::string(to_string(e.kind())), e.what(), usage ? kExitUsage : kExitFailure);
  } catch (const std::exception& e) {
    return report("internal", e.what(), kExitFailure);
  }
}
