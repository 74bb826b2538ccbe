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

#include "bcfl/chain.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>

#include "bcfl/error.hpp"
#include "bcfl/protocol.hpp"

namespace bcfl::chain {
namespace {

constexpr std::array<std::uint8_t, 8> kMagic = {'B', 'C', 'F', 'L', 'C', 'H', 'N', 1};

class Writer {
 public:
  void u32(std::uint32_t v) { uint(v, 4); }
  void u64(std::uint64_t v) { uint(v, 8); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v), 8); }
  void digest(const Digest& d) { bytes_.insert(bytes_.end(), d.begin(), d.end()); }
  void raw(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  void uint(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  std::uint64_t u64() { return uint(8); }
  double f64() { return std::bit_cast<double>(uint(8)); }
  Digest digest() {
    need(32);
    Digest d;
    std::copy_n(bytes_.begin() + static_cast<long>(pos_), 32, d.begin());
    pos_ += 32;
    return d;
  }
  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    require(pos_ + n <= bytes_.size(), ErrorKind::kIntegrity, "block truncated");
  }
  std::uint64_t uint(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

VerifyReport bad(std::uint64_t height, std::string field, std::string message) {
  return {false, height, std::move(field), std::move(message)};
}

// Re-applies one block to the running model and checks its digest.
std::optional<VerifyReport> replay_block(const Block& block, std::vector<double>& model) {
  if (block.height == 0) {
    model = block.genesis_model;
  } else {
    try {
      model = protocol::aggregate(block.updates, model, block.n_clients,
                                  {.allow_missing = true});
    } catch (const Error& e) {
      return bad(block.height, "updates", e.what());
    }
  }
  if (model_digest(model) != block.model_digest) {
    return bad(block.height, "model_digest", "re-aggregated model does not match recorded digest");
  }
  return std::nullopt;
}

}  // namespace

Digest sha256(std::span<const std::uint8_t> bytes) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    fail(ErrorKind::kIntegrity, "SHA-256 computation failed");
  }
  return out;
}

Digest model_digest(std::span<const double> params) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(params.size() * 8);
  for (double v : params) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  return sha256(bytes);
}

std::string to_hex(const Digest& digest) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (auto b : digest) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 15]);
  }
  return s;
}

double sample_mining_time(double lambda, Rng& rng) {
  require(lambda > 0.0 && std::isfinite(lambda), ErrorKind::kParameter,
          "mining rate lambda must be positive");
  return rng.exponential(lambda);
}

double fork_probability(double lambda, double omega, std::span<const double> competitor_speeds) {
  require(lambda > 0.0, ErrorKind::kParameter, "mining rate lambda must be positive");
  require(omega >= 0.0, ErrorKind::kParameter, "block size must be non-negative");
  double delay = 0.0;
  for (double u : competitor_speeds) {
    require(u > 0.0, ErrorKind::kParameter, "miner speed must be positive");
    delay += omega / u;
  }
  return -std::expm1(-lambda * delay);
}

double expected_step4_time(double lambda, double omega, std::span<const double> competitor_speeds) {
  require(lambda > 0.0, ErrorKind::kParameter, "mining rate lambda must be positive");
  require(omega >= 0.0, ErrorKind::kParameter, "block size must be non-negative");
  double worst = 0.0;
  double delay = 0.0;
  for (double u : competitor_speeds) {
    require(u > 0.0, ErrorKind::kParameter, "miner speed must be positive");
    worst = std::max(worst, omega / u);
    delay += omega / u;
  }
  return (1.0 / lambda + worst) * std::exp(lambda * delay);
}

MiningOutcome run_mining_race(std::span<const double> miner_speeds, double lambda, double omega,
                              Rng& rng, const RaceOptions& options) {
  require(!miner_speeds.empty(), ErrorKind::kParameter, "mining race needs at least one miner");
  require(lambda > 0.0, ErrorKind::kParameter, "mining rate lambda must be positive");
  require(omega >= 0.0, ErrorKind::kParameter, "block size must be non-negative");
  const std::size_t m = miner_speeds.size();

  std::uint64_t target = 0;
  if (options.proof_of_work) {
    const double p = lambda / options.proof_of_work->hash_rate;
    require(p > 0.0 && p <= 1.0, ErrorKind::kParameter, "PoW hash rate must exceed lambda");
    target = p >= 1.0 ? UINT64_MAX : static_cast<std::uint64_t>(std::ldexp(p, 64));
  }

  MiningOutcome outcome;
  std::vector<double> solve(m);
  std::vector<std::uint64_t> nonces(m, 0);
  std::vector<double> speeds(m);
  while (true) {
    ++outcome.attempts;
    for (std::size_t j = 0; j < m; ++j) {
      speeds[j] = options.sampler ? options.sampler(static_cast<std::uint32_t>(j), miner_speeds[j])
                                  : miner_speeds[j];
    }
    double max_delay = 0.0;
    for (std::size_t j = 0; j < m; ++j) max_delay = std::max(max_delay, omega / speeds[j]);

    if (!options.proof_of_work) {
      for (std::size_t j = 0; j < m; ++j) solve[j] = rng.exponential(lambda);
    } else {
      const auto& pow = *options.proof_of_work;
      double best = std::numeric_limits<double>::infinity();
      std::vector<std::uint8_t> message(pow.header);
      const std::size_t tail = message.size();
      message.resize(tail + 12);
      for (std::size_t j = 0; j < m; ++j) {
        std::uint64_t nonce = rng.next();
        std::uint64_t hashes = 0;
        solve[j] = std::numeric_limits<double>::infinity();
        // Solves later than best + max_delay cannot change the winner or fork outcome.
        const double horizon = best + max_delay;
        while (static_cast<double>(hashes) / pow.hash_rate <= horizon) {
          ++hashes;
          for (int b = 0; b < 4; ++b) message[tail + b] = static_cast<std::uint8_t>(j >> (8 * b));
          for (int b = 0; b < 8; ++b) message[tail + 4 + b] = static_cast<std::uint8_t>(nonce >> (8 * b));
          const Digest h = sha256(message);
          std::uint64_t lead = 0;
          for (int b = 0; b < 8; ++b) lead = (lead << 8) | h[b];
          if (lead < target) {
            solve[j] = static_cast<double>(hashes) / pow.hash_rate;
            nonces[j] = nonce;
            break;
          }
          ++nonce;
        }
        best = std::min(best, solve[j]);
      }
    }

    std::size_t winner = 0;
    for (std::size_t j = 1; j < m; ++j) {
      if (solve[j] < solve[winner]) winner = j;
    }
    bool forked = false;
    double propagation = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (j == winner) continue;
      const double delay = omega / speeds[j];
      propagation = std::max(propagation, delay);
      if (solve[j] - solve[winner] < delay) forked = true;
    }
    const double interval = sample_mining_time(lambda, rng);
    const double cost = interval + propagation;
    outcome.attempt_times.push_back(cost);
    outcome.elapsed += cost;
    if (!forked) {
      outcome.winner = static_cast<std::uint32_t>(winner);
      outcome.nonce = options.proof_of_work ? nonces[winner] : rng.next();
      return outcome;
    }
  }
}

std::vector<std::uint8_t> serialize(const Block& block) {
  Writer w;
  w.u64(block.height);
  w.digest(block.prev_hash);
  w.u32(block.round);
  w.u32(block.winner);
  w.u64(block.nonce);
  w.f64(block.timestamp);
  w.u32(block.n_clients);
  w.u32(block.value_bytes);
  w.digest(block.model_digest);
  w.u32(static_cast<std::uint32_t>(block.updates.size()));
  for (const auto& u : block.updates) {
    const auto encoded = compression::encode(u, block.value_bytes);
    w.u32(static_cast<std::uint32_t>(encoded.size()));
    w.raw(encoded);
  }
  w.u32(static_cast<std::uint32_t>(block.genesis_model.size()));
  for (double v : block.genesis_model) w.f64(v);
  return w.take();
}

Block deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  Block b;
  b.height = r.u64();
  b.prev_hash = r.digest();
  b.round = r.u32();
  b.winner = r.u32();
  b.nonce = r.u64();
  b.timestamp = r.f64();
  b.n_clients = r.u32();
  b.value_bytes = r.u32();
  b.model_digest = r.digest();
  const std::uint32_t count = r.u32();
  require(count <= b.n_clients, ErrorKind::kIntegrity, "block holds more updates than clients");
  b.updates.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = r.u32();
    b.updates.push_back(compression::decode(r.raw(len), b.value_bytes));
  }
  const std::uint32_t d = r.u32();
  require(static_cast<std::size_t>(d) * 8 <= r.remaining(), ErrorKind::kIntegrity,
          "genesis model truncated");
  b.genesis_model.resize(d);
  for (auto& v : b.genesis_model) v = r.f64();
  require(r.done(), ErrorKind::kIntegrity, "trailing bytes after block body");
  return b;
}

Digest block_hash(const Block& block) { return sha256(serialize(block)); }

void Ledger::append_genesis(std::span<const double> initial_model, std::uint32_t n_clients,
                            std::uint32_t value_bytes) {
  require(blocks_.empty(), ErrorKind::kIntegrity, "ledger already has a genesis block");
  Block g;
  g.n_clients = n_clients;
  g.value_bytes = value_bytes;
  g.genesis_model.assign(initial_model.begin(), initial_model.end());
  g.model_digest = model_digest(initial_model);
  append(std::move(g));
}

const Block& Ledger::append(Block block) {
  block.height = blocks_.size();
  block.prev_hash = hashes_.empty() ? Digest{} : hashes_.back();
  hashes_.push_back(block_hash(block));
  blocks_.push_back(std::move(block));
  return blocks_.back();
}

std::vector<double> Ledger::replay() const {
  std::vector<double> model;
  for (const auto& b : blocks_) {
    if (auto err = replay_block(b, model)) fail(ErrorKind::kIntegrity, err->message);
  }
  return model;
}

VerifyReport Ledger::verify() const { return verify_chain(to_bytes()); }

std::vector<std::uint8_t> Ledger::to_bytes() const {
  Writer w;
  w.raw(kMagic);
  for (const auto& b : blocks_) {
    const auto bytes = serialize(b);
    w.u32(static_cast<std::uint32_t>(bytes.size()));
    w.raw(bytes);
    w.digest(sha256(bytes));
  }
  return w.take();
}

void Ledger::write(const std::filesystem::path& path) const {
  const auto bytes = to_bytes();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::kIo, "cannot write ledger " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorKind::kIo, "short write on ledger " + path.string());
}

VerifyReport verify_chain(std::span<const std::uint8_t> file_bytes,
                          std::vector<double>* final_model) {
  if (file_bytes.size() < kMagic.size() ||
      !std::equal(kMagic.begin(), kMagic.end(), file_bytes.begin())) {
    return bad(0, "magic", "not a ledger file");
  }
  Reader r(file_bytes.subspan(kMagic.size()));
  std::vector<double> model;
  Digest prev{};
  std::uint64_t height = 0;
  for (; !r.done(); ++height) {
    Block block;
    try {
      const std::uint32_t len = r.u32();
      const auto bytes = r.raw(len);
      const Digest stored = r.digest();
      if (sha256(bytes) != stored) return bad(height, "hash", "block hash mismatch");
      block = deserialize(bytes);
      if (block.prev_hash != prev) return bad(height, "prev_hash", "broken link to previous block");
      prev = stored;
    } catch (const Error& e) {
      return bad(height, "length", e.what());
    }
    if (block.height != height) return bad(height, "height", "height field out of sequence");
    if (height == 0 && block.genesis_model.empty()) {
      return bad(height, "genesis", "genesis block carries no model");
    }
    if (height > 0 && !block.genesis_model.empty()) {
      return bad(height, "genesis", "non-genesis block carries a model");
    }
    if (auto err = replay_block(block, model)) return *err;
  }
  if (height == 0) return bad(0, "length", "ledger holds no blocks");
  if (final_model) *final_model = std::move(model);
  return {};
}

VerifyReport verify_chain_file(const std::filesystem::path& path,
                               std::vector<double>* final_model) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kIo, "cannot open ledger " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return verify_chain(bytes, final_model);
}

}  // namespace bcfl::chain
