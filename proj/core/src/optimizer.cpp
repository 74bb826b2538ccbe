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

#include "bcfl/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "bcfl/error.hpp"
#include "bcfl/kv.hpp"

namespace bcfl::optimizer {
namespace {

constexpr double kInvPhi = 0.6180339887498948482;

double chord_gap(double x0, double x1, double x2, double f0, double f1, double f2) {
  const double t = (x1 - x0) / (x2 - x0);
  const double interp = (1.0 - t) * f0 + t * f2;
  const double scale = std::max({std::abs(f0), std::abs(f1), std::abs(f2)});
  return scale > 0.0 ? (interp - f1) / scale : 0.0;
}

}  // namespace

double minimize_1d_convex(const std::function<double(double)>& f, double lo, double hi,
                          double tol) {
  require(lo < hi, ErrorKind::kParameter, "minimize_1d_convex needs lo < hi");
  require(tol > 0.0, ErrorKind::kParameter, "minimize_1d_convex needs tol > 0");
  double best_x = lo;
  double best_f = std::numeric_limits<double>::infinity();
  auto eval = [&](double x) {
    const double v = f(x);
    if (v < best_f || (v == best_f && x < best_x)) {
      best_f = v;
      best_x = x;
    }
    return v;
  };
  eval(lo);
  eval(hi);
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = eval(c);
  double fd = eval(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = eval(d);
    }
  }
  return best_x;
}

double minimize_1d_log(const std::function<double(double)>& f, double lo, double hi, double tol) {
  require(lo > 0.0 && lo < hi, ErrorKind::kParameter, "log search needs 0 < lo < hi");
  const double x = minimize_1d_convex([&](double t) { return f(std::exp(t)); }, std::log(lo),
                                      std::log(hi), tol);
  return std::clamp(std::exp(x), lo, hi);
}

Objective::Objective(std::function<double(double, double)> f, Box box)
    : f_(std::move(f)), box_(box) {
  require(box_.k_lo > 0.0 && box_.k_lo <= box_.k_hi, ErrorKind::kParameter,
          "objective box needs 0 < k_lo <= k_hi");
  require(box_.lambda_lo > 0.0 && box_.lambda_lo <= box_.lambda_hi, ErrorKind::kParameter,
          "objective box needs 0 < lambda_lo <= lambda_hi");
}

Objective Objective::from_model(const convergence::BoundCoefficients& bound,
                                const timecost::HCoefficients& h, std::size_t d, double Y,
                                double lambda_lo, double lambda_hi) {
  require(Y > 0.0, ErrorKind::kParameter, "budget Y must be positive");
  const auto dd = static_cast<double>(d);
  auto f = [bound, h, dd, Y](double k, double lambda) {
    return convergence::objective_sq_from_h(h.h(k, lambda), k, dd, bound, Y);
  };
  return Objective(f, Box{1.0, dd, lambda_lo, lambda_hi});
}

double Objective::operator()(double k, double lambda) const {
  const double v = f_(k, lambda);
  if (std::isnan(v)) {
    std::ostringstream msg;
    msg << "objective is NaN at k=" << format_real(k) << " lambda=" << format_real(lambda);
    fail(ErrorKind::kParameter, msg.str());
  }
  return v;
}

AcsSolution acs_solve(const Objective& obj, double k0, double lambda0, const AcsOptions& options) {
  const Box& box = obj.box();
  require(k0 >= box.k_lo && k0 <= box.k_hi && lambda0 >= box.lambda_lo &&
              lambda0 <= box.lambda_hi,
          ErrorKind::kParameter, "ACS start point lies outside the box");
  require(options.tol > 0.0 && options.max_sweeps >= 1 && options.axis_tol > 0.0,
          ErrorKind::kParameter, "invalid ACS options");

  AcsSolution sol;
  double k = k0, lambda = lambda0;
  double J = obj(k, lambda);
  require(std::isfinite(J), ErrorKind::kParameter,
          "ACS start point is infeasible (objective overflows)");
  sol.trace.push_back({0, Axis::kStart, k, lambda, J});

  for (std::size_t sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    const double before = J;
    if (box.k_lo < box.k_hi) {
      const double kn = minimize_1d_log([&](double x) { return obj(x, lambda); }, box.k_lo,
                                        box.k_hi, options.axis_tol);
      const double Jk = obj(kn, lambda);
      if (Jk < J) {
        k = kn;
        J = Jk;
      }
    }
    sol.trace.push_back({sweep, Axis::kK, k, lambda, J});
    if (box.lambda_lo < box.lambda_hi) {
      const double ln = minimize_1d_log([&](double x) { return obj(k, x); }, box.lambda_lo,
                                        box.lambda_hi, options.axis_tol);
      const double Jl = obj(k, ln);
      if (Jl < J) {
        lambda = ln;
        J = Jl;
      }
    }
    sol.trace.push_back({sweep, Axis::kLambda, k, lambda, J});
    sol.sweeps = sweep;
    if (std::abs(before - J) <= options.tol * std::abs(J)) {
      sol.converged = true;
      break;
    }
  }

  sol.k_star_real = k;
  sol.lambda_star = lambda;
  sol.objective = J;
  const double lo = std::max(std::floor(k), std::ceil(box.k_lo));
  const double hi = std::min(std::ceil(k), std::floor(box.k_hi));
  const double f_lo = obj(lo, lambda);
  const double f_hi = obj(hi, lambda);
  const double pick = f_hi < f_lo ? hi : lo;
  sol.k_star_int = static_cast<std::size_t>(pick);
  sol.objective_int = std::min(f_lo, f_hi);
  return sol;
}

AcsSolution reoptimize(const Objective& obj, const AcsSolution& previous,
                       const AcsOptions& options) {
  const Box& box = obj.box();
  return acs_solve(obj, std::clamp(previous.k_star_real, box.k_lo, box.k_hi),
                   std::clamp(previous.lambda_star, box.lambda_lo, box.lambda_hi), options);
}

double best_lambda_for_k(const Objective& obj, double k, double tol) {
  const Box& box = obj.box();
  if (box.lambda_lo == box.lambda_hi) return box.lambda_lo;
  return minimize_1d_log([&](double x) { return obj(k, x); }, box.lambda_lo, box.lambda_hi, tol);
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  require(lo > 0.0 && lo < hi && n >= 2, ErrorKind::kParameter,
          "log grid needs 0 < lo < hi and at least two points");
  std::vector<double> out(n);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

GridPoint grid_minimum(const Objective& obj, std::span<const double> ks,
                       std::span<const double> lambdas) {
  GridPoint best{0.0, 0.0, std::numeric_limits<double>::infinity()};
  for (double k : ks) {
    for (double l : lambdas) {
      const double v = obj(k, l);
      if (v < best.objective) best = {k, l, v};
    }
  }
  return best;
}

std::string grid_csv(const Objective& obj, std::span<const double> ks,
                     std::span<const double> lambdas) {
  std::ostringstream out;
  out << "k,lambda,objective\n";
  for (double k : ks) {
    for (double l : lambdas) {
      out << format_real(k) << ',' << format_real(l) << ',' << format_real(obj(k, l)) << '\n';
    }
  }
  return out.str();
}

double min_chord_gap(std::span<const double> x, std::span<const double> f) {
  require(x.size() == f.size() && x.size() >= 3, ErrorKind::kParameter,
          "convexity check needs at least three points");
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    gap = std::min(gap, chord_gap(x[i - 1], x[i], x[i + 1], f[i - 1], f[i], f[i + 1]));
  }
  return gap;
}

ConvexityReport convexity_report(const Objective& obj, std::span<const double> ks,
                                 std::span<const double> lambdas) {
  require(ks.size() >= 3 && lambdas.size() >= 3, ErrorKind::kParameter,
          "convexity grid needs at least three points per axis");
  std::vector<std::vector<double>> f(ks.size(), std::vector<double>(lambdas.size()));
  for (std::size_t i = 0; i < ks.size(); ++i) {
    for (std::size_t j = 0; j < lambdas.size(); ++j) f[i][j] = obj(ks[i], lambdas[j]);
  }
  ConvexityReport rep;
  rep.min_gap_k = rep.min_gap_lambda = std::numeric_limits<double>::infinity();
  auto finite3 = [](double a, double b, double c) {
    return std::isfinite(a) && std::isfinite(b) && std::isfinite(c);
  };
  for (std::size_t j = 0; j < lambdas.size(); ++j) {
    for (std::size_t i = 1; i + 1 < ks.size(); ++i) {
      if (!finite3(f[i - 1][j], f[i][j], f[i + 1][j])) {
        ++rep.skipped;
        continue;
      }
      ++rep.checked;
      const double g = chord_gap(ks[i - 1], ks[i], ks[i + 1], f[i - 1][j], f[i][j], f[i + 1][j]);
      if (g < rep.min_gap_k) {
        rep.min_gap_k = g;
        rep.worst_k = {ks[i], lambdas[j], f[i][j]};
      }
    }
  }
  for (std::size_t i = 0; i < ks.size(); ++i) {
    for (std::size_t j = 1; j + 1 < lambdas.size(); ++j) {
      if (!finite3(f[i][j - 1], f[i][j], f[i][j + 1])) {
        ++rep.skipped;
        continue;
      }
      ++rep.checked;
      const double g = chord_gap(lambdas[j - 1], lambdas[j], lambdas[j + 1], f[i][j - 1], f[i][j],
                                 f[i][j + 1]);
      if (g < rep.min_gap_lambda) {
        rep.min_gap_lambda = g;
        rep.worst_lambda = {ks[i], lambdas[j], f[i][j]};
      }
    }
  }
  return rep;
}

}  // namespace bcfl::optimizer
