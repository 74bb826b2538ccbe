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

#include "bcfl/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bcfl/error.hpp"

namespace bcfl::convergence {
namespace {

double distance_sq(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Sample-weighted global loss and gradient.
learning::LossAndGradient global_loss_and_gradient(
    std::span<const std::shared_ptr<const protocol::LocalObjective>> objectives,
    std::span<const double> w, std::vector<ParamVector>* per_client) {
  double total = 0.0;
  for (const auto& obj : objectives) total += static_cast<double>(obj->sample_count());
  learning::LossAndGradient out;
  out.gradient.assign(w.size(), 0.0);
  for (const auto& obj : objectives) {
    auto lg = obj->full(w);
    const double p = static_cast<double>(obj->sample_count()) / total;
    out.loss += p * lg.loss;
    for (std::size_t i = 0; i < w.size(); ++i) out.gradient[i] += p * lg.gradient[i];
    if (per_client) per_client->push_back(std::move(lg.gradient));
  }
  return out;
}

}  // namespace

void ConvergenceParams::validate() const {
  require(L >= 0.0 && G2 >= 0.0 && Gamma2 >= 0.0 && gap >= 0.0, ErrorKind::kParameter,
          "convergence constants must be non-negative");
  require(std::all_of(sigma2.begin(), sigma2.end(), [](double s) { return s >= 0.0; }),
          ErrorKind::kParameter, "gradient variances must be non-negative");
  require(C > 0.0, ErrorKind::kParameter, "step-size constant C must be positive");
  require(E >= 1 && N >= 1, ErrorKind::kParameter, "E and N must be at least 1");
}

ProbeObservation observe_first_round(
    std::span<const std::shared_ptr<const protocol::LocalObjective>> objectives,
    std::span<const double> w0, const protocol::LocalStep& step, std::uint64_t seed) {
  require(!objectives.empty(), ErrorKind::kParameter, "probe needs at least one client");
  const std::size_t d = w0.size();
  ProbeObservation obs;
  obs.w0.assign(w0.begin(), w0.end());

  auto at_w0 = global_loss_and_gradient(objectives, w0, &obs.client_grads_w0);
  obs.loss_w0 = at_w0.loss;
  obs.grad_w0 = std::move(at_w0.gradient);

  std::vector<compression::SparseUpdate> updates;
  for (std::size_t i = 0; i < objectives.size(); ++i) {
    const auto client = protocol::make_client(static_cast<std::uint32_t>(i), d);
    Rng rng(derive_seed(seed, i));
    updates.push_back(protocol::client_round(client, w0, *objectives[i], step, &rng).sent);
  }
  obs.wE = protocol::aggregate(updates, w0, objectives.size());

  auto at_wE = global_loss_and_gradient(objectives, obs.wE, nullptr);
  obs.loss_wE = at_wE.loss;
  obs.grad_wE = std::move(at_wE.gradient);

  if (step.batch_size > 0) {
    for (std::size_t i = 0; i < objectives.size(); ++i) {
      const auto& obj = *objectives[i];
      double var = 0.0;
      for (std::size_t j = 0; j < obj.sample_count(); ++j) {
        const std::size_t one[] = {j};
        var += distance_sq(obj.loss_and_gradient(w0, one).gradient, obs.client_grads_w0[i]);
      }
      obs.sigma2.push_back(var / static_cast<double>(obj.sample_count()));
    }
  }
  return obs;
}

ConvergenceParams estimate_params(const ProbeObservation& obs, double C, std::size_t E,
                                  std::size_t b) {
  const double step = std::sqrt(distance_sq(obs.wE, obs.w0));
  require(step > 0.0, ErrorKind::kParameter,
          "w_E equals w_0; the smoothness constant cannot be estimated");
  ConvergenceParams p;
  p.L = std::sqrt(distance_sq(obs.grad_wE, obs.grad_w0)) / step;
  p.gap = obs.loss_wE;
  for (const auto& g : obs.client_grads_w0) {
    p.G2 = std::max(p.G2, learning::squared_norm(g));
    p.Gamma2 = std::max(p.Gamma2, distance_sq(g, obs.grad_w0));
  }
  p.sigma2 = obs.sigma2;
  p.C = C;
  p.E = E;
  p.b = b;
  p.N = obs.client_grads_w0.size();
  p.validate();
  return p;
}

BoundCoefficients bound_coefficients(const ConvergenceParams& p) {
  p.validate();
  double variance = 0.0;
  if (p.b > 0 && !p.sigma2.empty()) {
    const double n = static_cast<double>(p.N);
    variance = p.C * p.L / (static_cast<double>(p.b) * n * n) *
               std::accumulate(p.sigma2.begin(), p.sigma2.end(), 0.0);
  }
  const double E = static_cast<double>(p.E);
  BoundCoefficients c;
  c.lambda_a = 8.0 / std::sqrt(E) * (p.gap / p.C + 2.0 * p.C * p.L * p.Gamma2 + variance);
  c.lambda_b = 16.0 * p.C * p.C * p.L * p.L * p.G2 * E;
  return c;
}

double iteration_bound(const ConvergenceParams& p, double T, double gamma) {
  require(T > 0.0, ErrorKind::kParameter, "T must be positive");
  require(gamma > 0.0 && gamma <= 1.0, ErrorKind::kParameter, "gamma must lie in (0, 1]");
  const auto c = bound_coefficients(p);
  const double E = static_cast<double>(p.E);
  const double bracket = c.lambda_a * std::sqrt(E) / 8.0;
  return bracket * 8.0 / std::sqrt(T) +
         (4.0 / (gamma * gamma) - 3.0) * 16.0 * p.C * p.C * p.L * p.L * p.G2 * E * E / T;
}

double rounds_bound(const BoundCoefficients& c, double R, double k, double d) {
  require(R > 0.0, ErrorKind::kParameter, "R must be positive");
  require(k > 0.0 && k <= d, ErrorKind::kParameter, "k must lie in (0, d]");
  return c.lambda_a / std::sqrt(R) + c.lambda_b * (4.0 * d * d / (k * k) - 3.0) / R;
}

double bound_value_from_h(double h, double k, double d, const BoundCoefficients& c, double Y) {
  require(Y > 0.0 && h > 0.0, ErrorKind::kParameter, "h and Y must be positive");
  require(k > 0.0 && k <= d, ErrorKind::kParameter, "k must lie in (0, d]");
  return c.lambda_a * std::sqrt(h / Y) + c.lambda_b * (4.0 * d * d / (k * k) - 3.0) * h / Y;
}

double bound_value(double k, double lambda, const timecost::NetworkEnv& env,
                   const BoundCoefficients& c, double Y) {
  return bound_value_from_h(timecost::h(k, lambda, env), k, static_cast<double>(env.d), c, Y);
}

double objective_sq_from_h(double h, double k, double d, const BoundCoefficients& c, double Y) {
  const double a = c.lambda_a;
  const double b = c.lambda_b;
  const double d2 = d * d;
  const double hk = h / (k * k);
  return a * a * h / Y + 16.0 * b * b * d2 * d2 / (Y * Y) * hk * hk +
         8.0 * a * b * d2 / std::pow(Y, 1.5) * std::pow(h / std::pow(k, 4.0 / 3.0), 1.5);
}

double objective_sq_direct(double h, double k, double d, const BoundCoefficients& c, double Y) {
  const double j = c.lambda_a * std::sqrt(h / Y) + c.lambda_b * 4.0 * d * d / (k * k) * h / Y;
  return j * j;
}

StepSizeCheck check_step_size(double C, double L, double T) {
  require(T > 0.0, ErrorKind::kParameter, "T must be positive");
  StepSizeCheck s;
  s.eta = C / std::sqrt(T);
  s.limit = L > 0.0 ? 1.0 / (16.0 * L) : std::numeric_limits<double>::infinity();
  return s;
}

double residual_bound(double eta, double gamma, std::size_t E, double G2) {
  require(gamma > 0.0 && gamma <= 1.0, ErrorKind::kParameter, "gamma must lie in (0, 1]");
  const double e = static_cast<double>(E);
  const double q = 1.0 - gamma;
  return 4.0 * eta * eta * q * q * e * e * G2 / (gamma * gamma);
}

GradientNormHistory::GradientNormHistory(std::size_t capacity) : capacity_(capacity) {
  require(capacity >= 2, ErrorKind::kParameter, "history capacity must be at least 2");
}

void GradientNormHistory::add(double norm_sq) {
  if (seen_++ % stride_ != 0) return;
  samples_.push_back(norm_sq);
  if (samples_.size() >= capacity_) {
    std::size_t keep = 0;
    for (std::size_t i = 0; i < samples_.size(); i += 2) samples_[keep++] = samples_[i];
    samples_.resize(keep);
    stride_ *= 2;
  }
}

void GradientNormHistory::add(std::span<const double> norms_sq) {
  for (double v : norms_sq) add(v);
}

double GradientNormHistory::estimate() const {
  require(!samples_.empty(), ErrorKind::kParameter, "gradient-norm history is empty");
  return std::accumulate(samples_.begin(), samples_.end(), 0.0) /
         static_cast<double>(samples_.size());
}

}  // namespace bcfl::convergence
