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

#include "bcfl/timecost.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bcfl/chain.hpp"
#include "bcfl/compression.hpp"
#include "bcfl/error.hpp"
#include "bcfl/kv.hpp"

namespace bcfl::timecost {

double shannon_rate(double bw_hz, double gain, double p_t_w, double p_n_w) {
  require(bw_hz > 0.0 && gain > 0.0 && p_t_w > 0.0 && p_n_w > 0.0, ErrorKind::kParameter,
          "Shannon rate needs positive bandwidth, gain and powers");
  return bw_hz * std::log2(1.0 + gain * p_t_w / p_n_w);
}

double LinkModel::rate_bytes_per_s() const { return shannon_rate(bw_hz, gain, p_t_w, p_n_w) / 8.0; }

double sample_link_rate(double mean, double jitter, Rng& rng) {
  require(mean > 0.0, ErrorKind::kParameter, "mean link rate must be positive");
  require(jitter >= 0.0, ErrorKind::kParameter, "rate jitter must be non-negative");
  if (jitter == 0.0) return mean;
  return std::max(mean + jitter * mean * rng.normal(), 0.01 * mean);
}

std::vector<std::uint32_t> assign_clients(std::size_t n_clients, std::size_t n_miners) {
  require(n_clients >= 1 && n_miners >= 1, ErrorKind::kParameter,
          "need at least one client and one miner");
  std::vector<std::uint32_t> owner(n_clients);
  for (std::size_t i = 0; i < n_clients; ++i) owner[i] = static_cast<std::uint32_t>(i % n_miners);
  return owner;
}

std::vector<std::size_t> NetworkEnv::clients_per_miner() const {
  std::vector<std::size_t> counts(n_miners(), 0);
  for (auto j : miner_of_client) ++counts.at(j);
  return counts;
}

void NetworkEnv::validate() const {
  require(n_clients() >= 1 && n_miners() >= 1, ErrorKind::kParameter,
          "environment needs clients and miners");
  require(client_down.size() == n_clients() && miner_of_client.size() == n_clients(),
          ErrorKind::kParameter, "per-client vectors disagree in length");
  auto positive = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0 && std::isfinite(x); });
  };
  require(positive(client_up) && positive(client_down) && positive(miner_rate),
          ErrorKind::kParameter, "all link rates must be positive");
  for (auto j : miner_of_client) {
    require(j < n_miners(), ErrorKind::kParameter, "client assigned to unknown miner");
  }
  require(jitter >= 0.0, ErrorKind::kParameter, "jitter must be non-negative");
  require(tau_local >= 0.0 && tau_aggre >= 0.0, ErrorKind::kParameter,
          "compute times must be non-negative");
  require(d >= 1, ErrorKind::kParameter, "model dimension must be positive");
  require(s > 0.0, ErrorKind::kParameter, "value width must be positive");
}

NetworkEnv NetworkEnv::homogeneous(std::size_t n_clients, std::size_t n_miners, double rate,
                                   std::size_t d, double s, double tau_local, double tau_aggre,
                                   double jitter) {
  NetworkEnv env;
  env.client_up.assign(n_clients, rate);
  env.client_down.assign(n_clients, rate);
  env.miner_rate.assign(n_miners, rate);
  env.miner_of_client = assign_clients(n_clients, n_miners);
  env.jitter = jitter;
  env.tau_local = tau_local;
  env.tau_aggre = tau_aggre;
  env.d = d;
  env.s = s;
  env.validate();
  return env;
}

NetworkEnv NetworkEnv::scaled_rates(double factor) const {
  NetworkEnv out = *this;
  for (auto* v : {&out.client_up, &out.client_down, &out.miner_rate}) {
    for (double& x : *v) x *= factor;
  }
  return out;
}

std::uint32_t worst_case_winner(const NetworkEnv& env) {
  const auto it = std::max_element(env.miner_rate.begin(), env.miner_rate.end());
  return static_cast<std::uint32_t>(it - env.miner_rate.begin());
}

std::vector<double> competitor_rates(const NetworkEnv& env) {
  const auto winner = worst_case_winner(env);
  std::vector<double> rates;
  rates.reserve(env.n_miners() - 1);
  for (std::size_t j = 0; j < env.n_miners(); ++j) {
    if (j != winner) rates.push_back(env.miner_rate[j]);
  }
  return rates;
}

RoundTerms round_terms(double per_client_bytes, double lambda, const NetworkEnv& env) {
  require(per_client_bytes >= 0.0, ErrorKind::kParameter, "payload must be non-negative");
  require(lambda > 0.0 && std::isfinite(lambda), ErrorKind::kParameter,
          "mining rate lambda must be positive");
  const auto n = static_cast<double>(env.n_clients());
  const auto per_miner = env.clients_per_miner();
  const double block = n * per_client_bytes;

  RoundTerms t;
  t.local = env.tau_local;
  t.aggre = env.tau_aggre;
  for (std::size_t i = 0; i < env.n_clients(); ++i) {
    t.up = std::max(t.up, per_client_bytes / env.client_up[i]);
    t.down = std::max(t.down, block / env.client_down[i]);
  }
  for (std::size_t j = 0; j < env.n_miners(); ++j) {
    const double others = n - static_cast<double>(per_miner[j]);
    t.cross = std::max(t.cross, others * per_client_bytes / env.miner_rate[j]);
  }
  t.mine = chain::expected_step4_time(lambda, block, competitor_rates(env));
  return t;
}

RoundTerms h_terms(double k, double lambda, const NetworkEnv& env) {
  require(k > 0.0 && k <= static_cast<double>(env.d), ErrorKind::kParameter,
          "h(k, lambda) needs 0 < k <= d");
  const double omega = compression::payload_bytes(0, env.d, env.s).per_entry;
  return round_terms(k * omega, lambda, env);
}

double h(double k, double lambda, const NetworkEnv& env) { return h_terms(k, lambda, env).total(); }

HCoefficients h_coefficients(const NetworkEnv& env) {
  env.validate();
  const auto n = static_cast<double>(env.n_clients());
  const auto per_miner = env.clients_per_miner();
  HCoefficients c;
  c.omega = compression::payload_bytes(0, env.d, env.s).per_entry;
  c.tau_fixed = env.tau_local + env.tau_aggre;

  double up = 0.0, cross = 0.0, down = 0.0;
  for (std::size_t i = 0; i < env.n_clients(); ++i) {
    up = std::max(up, c.omega / env.client_up[i]);
    down = std::max(down, n * c.omega / env.client_down[i]);
  }
  for (std::size_t j = 0; j < env.n_miners(); ++j) {
    cross = std::max(cross, (n - static_cast<double>(per_miner[j])) * c.omega / env.miner_rate[j]);
  }
  c.lambda_t = up + cross + down;
  for (double u : competitor_rates(env)) {
    c.lambda_p = std::max(c.lambda_p, n * c.omega / u);
    c.fork_per_lambda += n * c.omega / u;
  }
  return c;
}

double HCoefficients::h(double k, double lambda) const {
  const double growth = std::exp(fork_exponent(lambda) * k);
  return tau_fixed + lambda_t * k + growth / lambda + lambda_p * k * growth;
}

NetworkEnv EnvFile::to_env() const {
  return NetworkEnv::homogeneous(n_clients, n_miners, link.rate_bytes_per_s(), d, s_bytes,
                                 tau_local_s, tau_aggre_s, jitter);
}

std::string EnvFile::to_text() const {
  std::ostringstream out;
  out << "bw_hz = " << format_real(link.bw_hz) << "\n"
      << "gain = " << format_real(link.gain) << "\n"
      << "p_t_w = " << format_real(link.p_t_w) << "\n"
      << "p_n_w = " << format_real(link.p_n_w) << "\n"
      << "jitter = " << format_real(jitter) << "\n"
      << "n_clients = " << n_clients << "\n"
      << "n_miners = " << n_miners << "\n"
      << "tau_local_s = " << format_real(tau_local_s) << "\n"
      << "tau_aggre_s = " << format_real(tau_aggre_s) << "\n"
      << "s_bytes = " << format_real(s_bytes) << "\n"
      << "d = " << d << "\n";
  return out.str();
}

EnvFile EnvFile::from_map(const std::map<std::string, std::string>& kv) {
  KeyValueReader r(kv);
  EnvFile e;
  e.link.bw_hz = r.real("bw_hz", e.link.bw_hz);
  e.link.gain = r.real("gain", e.link.gain);
  e.link.p_t_w = r.real("p_t_w", e.link.p_t_w);
  e.link.p_n_w = r.real("p_n_w", e.link.p_n_w);
  e.jitter = r.real("jitter", e.jitter);
  e.n_clients = r.count("n_clients", e.n_clients);
  e.n_miners = r.count("n_miners", e.n_miners);
  e.tau_local_s = r.real("tau_local_s", e.tau_local_s);
  e.tau_aggre_s = r.real("tau_aggre_s", e.tau_aggre_s);
  e.s_bytes = r.real("s_bytes", e.s_bytes);
  e.d = r.count("d", e.d);
  r.reject_unknown();
  return e;
}

EnvFile load_env_file(const std::filesystem::path& path) {
  return EnvFile::from_map(read_key_values(path));
}

}  // namespace bcfl::timecost
