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

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "bcfl_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Result bcfl(const std::string& args) {
  const auto out = workdir() / "stdout.txt";
  const auto err = workdir() / "stderr.txt";
  const std::string cmd = std::string("'") + BCFL_CLI_PATH + "' " + args + " >'" + out.string() +
                          "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path tiny_config() {
  const auto p = workdir() / "tiny.cfg";
  std::ofstream(p) << "n_clients = 4\nn_miners = 4\nfeature_dim = 6\nper_client = 25\n"
                      "test_size = 60\nhidden = 5\ncenter_scale = 1\nbaselines = 0.05,1\n";
  return p;
}

std::string cfg() { return "--config '" + tiny_config().string() + "'"; }

TEST(Cli, PrintsDefaultConfig) {
  const auto r = bcfl("--print-default-config");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("n_clients = 50"), std::string::npos);
  EXPECT_NE(r.out.find("eta = 0.05"), std::string::npos);
}

TEST(Cli, DefaultConfigFeedsBack) {
  const auto path = workdir() / "default.cfg";
  std::ofstream(path) << bcfl("--print-default-config").out;
  const auto r = bcfl("--config '" + path.string() + "' --print-default-config");
  EXPECT_EQ(r.code, 0);
}

TEST(Cli, UsageErrorsExitTwo) {
  auto r = bcfl("--mode sideways simulate");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("\"error\":\"usage\""), std::string::npos);
  r = bcfl("");
  EXPECT_EQ(r.code, 2);
  r = bcfl("--set bogus=1 simulate");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("\"error\":\"config\""), std::string::npos);
  r = bcfl("verify-chain");
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, SimulateIsDeterministic) {
  const auto a = workdir() / "sim_a";
  const auto b = workdir() / "sim_b";
  ASSERT_EQ(bcfl(cfg() + " --seed 1 --out '" + a.string() + "' simulate").code, 0);
  ASSERT_EQ(bcfl(cfg() + " --seed 1 --out '" + b.string() + "' simulate").code, 0);
  for (const char* f : {"metrics.csv", "summary.json", "ledger.chain", "solution_trace.json"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto c = workdir() / "sim_c";
  ASSERT_EQ(bcfl(cfg() + " --seed 2 --out '" + c.string() + "' simulate").code, 0);
  EXPECT_NE(slurp(a / "ledger.chain"), slurp(c / "ledger.chain"));
}

TEST(Cli, VerifyChainDetectsTruncation) {
  const auto dir = workdir() / "verify";
  ASSERT_EQ(bcfl(cfg() + " --out '" + dir.string() + "' simulate").code, 0);
  const auto ledger = dir / "ledger.chain";
  auto ok = bcfl("verify-chain --ledger '" + ledger.string() + "'");
  EXPECT_EQ(ok.code, 0);
  EXPECT_NE(ok.out.find("final_model_sha256"), std::string::npos);
  const auto summary = slurp(dir / "summary.json");
  const auto pos = ok.out.find("final_model_sha256");
  const auto digest = ok.out.substr(ok.out.find('"', pos + 20) + 1, 64);
  EXPECT_NE(summary.find(digest), std::string::npos);

  const auto bytes = slurp(ledger);
  const auto cut = dir / "truncated.chain";
  std::ofstream(cut, std::ios::binary) << bytes.substr(0, bytes.size() - 11);
  const auto bad = bcfl("verify-chain --ledger '" + cut.string() + "'");
  EXPECT_NE(bad.code, 0);
  EXPECT_NE(bad.err.find("\"height\""), std::string::npos);
}

TEST(Cli, EstimateAndOptimize) {
  const auto dir = workdir() / "est";
  auto r = bcfl(cfg() + " --out '" + dir.string() + "' estimate");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"L\""), std::string::npos);
  const auto params = dir / "convergence.json";
  ASSERT_TRUE(fs::exists(params));
  const auto env = workdir() / "env.txt";
  std::ofstream(env) << "n_clients = 50\nn_miners = 50\nd = 122570\n";
  const auto grid = workdir() / "grid.csv";
  r = bcfl("optimize --params '" + params.string() + "' --env '" + env.string() +
           "' --budget 500 --grid '" + grid.string() + "' --grid-size 5");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("k_star_int"), std::string::npos);
  EXPECT_NE(r.out.find("\"d\": 122570"), std::string::npos);
  const auto rows = slurp(grid);
  EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 26);
}

TEST(Cli, SweepAndCompare) {
  const auto dir = workdir() / "sweep";
  auto r = bcfl(cfg() + " --out '" + dir.string() + "' sweep --k-list 0.05,0.1");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "sweep.csv"));
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 3);
  const auto cmp = workdir() / "cmp";
  r = bcfl(cfg() + " --out '" + cmp.string() + "' compare");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("uncompressed"), std::string::npos);
}

TEST(Cli, MissingFilesAreErrors) {
  auto r = bcfl("verify-chain --ledger /nonexistent/ledger.chain");
  EXPECT_NE(r.code, 0);
  r = bcfl("--config /nonexistent.cfg simulate");
  EXPECT_EQ(r.code, 2);
}

}  // namespace
