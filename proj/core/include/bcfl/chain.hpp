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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bcfl/compression.hpp"
#include "bcfl/random.hpp"

namespace bcfl::chain {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> bytes);

/// SHA-256 over the little-endian IEEE-754 encoding of the parameters.
Digest model_digest(std::span<const double> params);

std::string to_hex(const Digest& digest);

struct MinerState {
  std::uint32_t id = 0;
  double download_rate = 0.0;  // bytes/s
  std::vector<std::uint32_t> clients;
};

/// One PoW block interval, exponential with mean 1/lambda.
double sample_mining_time(double lambda, Rng& rng);

/// 1 - exp(-lambda * sum_j omega / u_j) over the non-winning miners' speeds.
double fork_probability(double lambda, double omega, std::span<const double> competitor_speeds);

/// (1/lambda + max_j omega/u_j) * exp(lambda * sum_j omega/u_j).
double expected_step4_time(double lambda, double omega, std::span<const double> competitor_speeds);

struct MiningOutcome {
  std::uint32_t winner = 0;
  std::size_t attempts = 0;
  double elapsed = 0.0;
  std::vector<double> attempt_times;
  std::uint64_t nonce = 0;
};

/// Returns a fresh propagation speed for a miner; called once per miner and attempt.
using SpeedSampler = std::function<double(std::uint32_t miner, double mean)>;

/// Hash-based mining: each miner hashes header||nonce at hash_rate hashes/s and
/// succeeds when the leading 64 bits fall below a target chosen so the
/// per-miner expected solve time is 1/lambda.
struct ProofOfWork {
  double hash_rate = 2000.0;
  std::vector<std::uint8_t> header;
};

struct RaceOptions {
  SpeedSampler sampler;                    // empty: use mean speeds as given
  std::optional<ProofOfWork> proof_of_work;  // empty: exponential draws
};

/// Per attempt every miner draws a solve time; the earliest wins and a fork
/// occurs if some other miner solves within omega/u_j of the winner. Forked
/// attempts restart with fresh draws. Each attempt is charged a block interval
/// drawn from sample_mining_time plus the winner's propagation time.
MiningOutcome run_mining_race(std::span<const double> miner_speeds, double lambda, double omega,
                              Rng& rng, const RaceOptions& options = {});

struct Block {
  std::uint64_t height = 0;
  Digest prev_hash{};
  std::uint32_t round = 0;
  std::uint32_t winner = 0;
  std::uint64_t nonce = 0;
  double timestamp = 0.0;  // simulated seconds at block acceptance
  std::uint32_t n_clients = 0;  // aggregation divisor
  std::uint32_t value_bytes = 8;
  Digest model_digest{};        // model after applying this block
  std::vector<compression::SparseUpdate> updates;  // sorted by client id
  std::vector<double> genesis_model;               // height 0 only

  std::uint32_t missing_updates() const {
    return n_clients - static_cast<std::uint32_t>(updates.size());
  }
};

std::vector<std::uint8_t> serialize(const Block& block);
Block deserialize(std::span<const std::uint8_t> bytes);

/// Hash over the serialized block.
Digest block_hash(const Block& block);

struct VerifyReport {
  bool ok = true;
  std::uint64_t bad_height = 0;
  std::string field;
  std::string message;
};

/// Append-only hash-linked chain. Height 0 carries the initial model; every
/// later block carries one round's updates and the digest of the model they
/// produce.
class Ledger {
 public:
  void append_genesis(std::span<const double> initial_model, std::uint32_t n_clients,
                      std::uint32_t value_bytes);
  /// Fills height and prev_hash, then appends.
  const Block& append(Block block);

  const std::vector<Block>& blocks() const { return blocks_; }
  std::size_t size() const { return blocks_.size(); }
  bool empty() const { return blocks_.empty(); }

  /// Replays every block from genesis.
  std::vector<double> replay() const;
  VerifyReport verify() const;

  void write(const std::filesystem::path& path) const;
  std::vector<std::uint8_t> to_bytes() const;

 private:
  std::vector<Block> blocks_;
  std::vector<Digest> hashes_;
};

/// File layout: 8-byte magic, then per block a u32 length, the serialized
/// block, and its 32-byte SHA-256.
VerifyReport verify_chain(std::span<const std::uint8_t> file_bytes,
                          std::vector<double>* final_model = nullptr);
VerifyReport verify_chain_file(const std::filesystem::path& path,
                               std::vector<double>* final_model = nullptr);

}  // namespace bcfl::chain
