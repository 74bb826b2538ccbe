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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bcfl/convergence.hpp"
#include "bcfl/timecost.hpp"

namespace bcfl::optimizer {

/// Golden-section search for a unimodal f on [lo, hi]; stops once the bracket
/// is narrower than tol and returns the best point evaluated. Ties, including
/// two +inf probes, shrink the bracket toward lo.
double minimize_1d_convex(const std::function<double(double)>& f, double lo, double hi,
                          double tol);

/// The same search over log(x); tol is relative.
double minimize_1d_log(const std::function<double(double)>& f, double lo, double hi, double tol);

struct Box {
  double k_lo = 1.0;
  double k_hi = 1.0;
  double lambda_lo = 1e-4;
  double lambda_hi = 100.0;
};

/// J^2(k, lambda) over a box; a degenerate axis (lo == hi) is held fixed
/// by the search. Overflowing points evaluate to +inf and are
/// treated as infeasible; NaN is an error.
class Objective {
 public:
  Objective(std::function<double(double, double)> f, Box box);

  /// Squared objective with the -3 dropped, h from the folded coefficients.
  static Objective from_model(const convergence::BoundCoefficients& bound,
                              const timecost::HCoefficients& h, std::size_t d, double Y,
                              double lambda_lo = 1e-4, double lambda_hi = 100.0);

  double operator()(double k, double lambda) const;
  const Box& box() const { return box_; }

 private:
  std::function<double(double, double)> f_;
  Box box_;
};

enum class Axis { kStart, kK, kLambda };

struct TraceEntry {
  std::size_t sweep = 0;
  Axis axis = Axis::kStart;
  double k = 0.0;
  double lambda = 0.0;
  double objective = 0.0;
};

struct AcsOptions {
  double tol = 1e-8;          // relative change of J^2 between sweeps
  std::size_t max_sweeps = 100;
  double axis_tol = 1e-10;    // relative bracket width of each 1-D search
};

struct AcsSolution {
  double k_star_real = 0.0;
  std::size_t k_star_int = 1;
  double lambda_star = 0.0;
  double objective = 0.0;      // at (k_star_real, lambda_star)
  double objective_int = 0.0;  // at (k_star_int, lambda_star)
  std::size_t sweeps = 0;
  bool converged = false;
  std::vector<TraceEntry> trace;
};

/// Alternate convex search: minimise over k with lambda fixed, then over
/// lambda with k fixed, keeping a half-step only if it lowers J^2.
AcsSolution acs_solve(const Objective& obj, double k0, double lambda0,
                      const AcsOptions& options = {});

/// Warm start from a previous solution.
AcsSolution reoptimize(const Objective& obj, const AcsSolution& previous,
                       const AcsOptions& options = {});

/// Lambda minimising J^2 for a fixed k.
double best_lambda_for_k(const Objective& obj, double k, double tol = 1e-10);

/// Points equally spaced in log(x), both ends included.
std::vector<double> log_grid(double lo, double hi, std::size_t n);

struct GridPoint {
  double k = 0.0;
  double lambda = 0.0;
  double objective = 0.0;
};

GridPoint grid_minimum(const Objective& obj, std::span<const double> ks,
                       std::span<const double> lambdas);

/// Rows k,lambda,objective for every grid point.
std::string grid_csv(const Objective& obj, std::span<const double> ks,
                     std::span<const double> lambdas);

/// Chord test of convexity along each axis. For consecutive grid triples
/// x0 < x1 < x2 the gap (linear interpolation of f0, f2 at x1) - f1 is
/// divided by max(|f0|, |f1|, |f2|); convexity means no gap below -tolerance.
struct ConvexityReport {
  double min_gap_k = 0.0;
  double min_gap_lambda = 0.0;
  GridPoint worst_k;
  GridPoint worst_lambda;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // triples with a non-finite value

  bool convex(double tolerance = 1e-9) const {
    return min_gap_k >= -tolerance && min_gap_lambda >= -tolerance;
  }
};

ConvexityReport convexity_report(const Objective& obj, std::span<const double> ks,
                                 std::span<const double> lambdas);

/// Convexity gap of one-variable samples.
double min_chord_gap(std::span<const double> x, std::span<const double> f);

}  // namespace bcfl::optimizer
