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
#include <memory>
#include <span>
#include <vector>

#include "bcfl/learning.hpp"
#include "bcfl/protocol.hpp"
#include "bcfl/timecost.hpp"

namespace bcfl::convergence {

using learning::ParamVector;

struct ConvergenceParams {
  double L = 0.0;       // smoothness
  double G2 = 0.0;      // squared gradient-norm bound
  double Gamma2 = 0.0;  // non-IID degree
  std::vector<double> sigma2;  // per-client gradient variance, empty in full batch
  double gap = 0.0;     // F(w0) - F*
  double C = 0.15;
  std::size_t E = 5;
  std::size_t b = 0;    // mini-batch size, 0 for full batch
  std::size_t N = 1;

  void validate() const;
};

struct BoundCoefficients {
  double lambda_a = 0.0;
  double lambda_b = 0.0;
};

/// What one global iteration from w0 reveals about the constants.
struct ProbeObservation {
  ParamVector w0;
  ParamVector wE;
  double loss_w0 = 0.0;
  double loss_wE = 0.0;
  ParamVector grad_w0;  // global gradient
  ParamVector grad_wE;
  std::vector<ParamVector> client_grads_w0;
  std::vector<double> sigma2;
};

/// Runs one compressed round from w0 on fresh client states and records
/// losses and gradients. The global loss weights clients by sample count.
ProbeObservation observe_first_round(
    std::span<const std::shared_ptr<const protocol::LocalObjective>> objectives,
    std::span<const double> w0, const protocol::LocalStep& step, std::uint64_t seed = 0);

/// L as the secant ratio of global gradients, gap as the loss at w_E,
/// G2 and Gamma2 as maxima over clients.
ConvergenceParams estimate_params(const ProbeObservation& obs, double C, std::size_t E,
                                  std::size_t b);

BoundCoefficients bound_coefficients(const ConvergenceParams& p);

/// Bound on E||z_T||^2 after T local iterations with compression ratio gamma.
double iteration_bound(const ConvergenceParams& p, double T, double gamma);

/// Lambda_A / sqrt(R) + Lambda_B (4 d^2 / k^2 - 3) / R.
double rounds_bound(const BoundCoefficients& c, double R, double k, double d);

/// Lambda_A sqrt(h / Y) + Lambda_B (4 d^2 / k^2 - 3) h / Y.
double bound_value(double k, double lambda, const timecost::NetworkEnv& env,
                   const BoundCoefficients& c, double Y);
double bound_value_from_h(double h, double k, double d, const BoundCoefficients& c, double Y);

/// Square of the objective with the -3 dropped, expanded into three terms.
double objective_sq_from_h(double h, double k, double d, const BoundCoefficients& c, double Y);
/// The same quantity as (Lambda_A sqrt(h/Y) + Lambda_B 4 d^2/k^2 h/Y)^2.
double objective_sq_direct(double h, double k, double d, const BoundCoefficients& c, double Y);

struct StepSizeCheck {
  double eta = 0.0;    // C / sqrt(T)
  double limit = 0.0;  // 1 / (16 L)
  bool ok() const { return eta <= limit; }
};
StepSizeCheck check_step_size(double C, double L, double T);

/// 4 eta^2 (1 - gamma)^2 E^2 G^2 / gamma^2.
double residual_bound(double eta, double gamma, std::size_t E, double G2);

/// Squared gradient norms sampled during training. When capacity is reached
/// every other stored sample is dropped and the stride doubles.
class GradientNormHistory {
 public:
  explicit GradientNormHistory(std::size_t capacity = 1 << 16);
  void add(double norm_sq);
  void add(std::span<const double> norms_sq);
  double estimate() const;
  std::size_t size() const { return samples_.size(); }
  std::size_t seen() const { return seen_; }

 private:
  std::size_t capacity_;
  std::size_t stride_ = 1;
  std::size_t seen_ = 0;
  std::vector<double> samples_;
};

}  // namespace bcfl::convergence
