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
#include <string>
#include <vector>

#include "bcfl/random.hpp"

namespace bcfl::timecost {

/// Wireless link parameters; rate() converts the Shannon capacity to bytes/s.
struct LinkModel {
  double bw_hz = 20e6;
  double gain = 1e-8;
  double p_t_w = 0.5;
  double p_n_w = 1e-10;

  double rate_bytes_per_s() const;
};

/// Shannon capacity BW * log2(1 + g P_t / P_n), in bits/s.
double shannon_rate(double bw_hz, double gain, double p_t_w, double p_n_w);

/// Gaussian(mean, jitter * mean) clamped below at 0.01 * mean.
double sample_link_rate(double mean, double jitter, Rng& rng);

/// Everything the round-time model needs. Rates are means in bytes/s.
struct NetworkEnv {
  std::vector<double> client_up;
  std::vector<double> client_down;
  std::vector<double> miner_rate;
  std::vector<std::uint32_t> miner_of_client;
  double jitter = 0.1;
  double tau_local = 0.2;
  double tau_aggre = 0.0;
  std::size_t d = 0;
  double s = 4.0;

  std::size_t n_clients() const { return client_up.size(); }
  std::size_t n_miners() const { return miner_rate.size(); }
  std::vector<std::size_t> clients_per_miner() const;
  void validate() const;

  /// Same rate on every link, clients assigned by assign_clients().
  static NetworkEnv homogeneous(std::size_t n_clients, std::size_t n_miners, double rate,
                                std::size_t d, double s, double tau_local, double tau_aggre,
                                double jitter);
  NetworkEnv scaled_rates(double factor) const;
};

/// One-to-one when M == N, otherwise round-robin.
std::vector<std::uint32_t> assign_clients(std::size_t n_clients, std::size_t n_miners);

/// Miner treated as the block winner in the analytic model: the fastest one,
/// which leaves the slowest competitors and so maximises the expected cost.
std::uint32_t worst_case_winner(const NetworkEnv& env);

/// Mean download rates of every miner other than the worst-case winner.
std::vector<double> competitor_rates(const NetworkEnv& env);

/// Expected duration of each of the six round steps.
struct RoundTerms {
  double local = 0.0;
  double up = 0.0;
  double cross = 0.0;
  double mine = 0.0;
  double down = 0.0;
  double aggre = 0.0;

  double total() const { return local + up + cross + mine + down + aggre; }
};

/// Expected round terms when every client sends per_client_bytes.
RoundTerms round_terms(double per_client_bytes, double lambda, const NetworkEnv& env);

/// Expected round time with k relaxed to a positive real, using
/// k * (s + ceil(log2 d)/8) bytes per client.
double h(double k, double lambda, const NetworkEnv& env);
RoundTerms h_terms(double k, double lambda, const NetworkEnv& env);

/// h(k, lambda) = tau + lambda_t k + (1/lambda + lambda_p k) exp(lambda * fork_per_lambda * k).
struct HCoefficients {
  double omega = 0.0;            // bytes per transmitted entry
  double tau_fixed = 0.0;        // tau_local + tau_aggre
  double lambda_t = 0.0;         // upload + cross + download seconds per entry
  double lambda_p = 0.0;         // propagation seconds per entry
  double fork_per_lambda = 0.0;  // sum of competitor delays per entry

  double fork_exponent(double lambda) const { return lambda * fork_per_lambda; }
  double h(double k, double lambda) const;
};

HCoefficients h_coefficients(const NetworkEnv& env);

/// Plain-text key=value environment description (see README).
struct EnvFile {
  LinkModel link;
  double jitter = 0.1;
  std::size_t n_clients = 50;
  std::size_t n_miners = 50;
  double tau_local_s = 0.2;
  double tau_aggre_s = 0.0;
  double s_bytes = 4.0;
  std::size_t d = 122570;

  NetworkEnv to_env() const;
  std::string to_text() const;
  static EnvFile from_map(const std::map<std::string, std::string>& kv);
};

EnvFile load_env_file(const std::filesystem::path& path);

}  // namespace bcfl::timecost
