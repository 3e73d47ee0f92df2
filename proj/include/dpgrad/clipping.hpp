// Copyright 2026 The dpgrad-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPGRAD_CLIPPING_HPP_
#define DPGRAD_CLIPPING_HPP_

#include <cstddef>
#include <vector>

#include "dpgrad/compression.hpp"
#include "dpgrad/error_analysis.hpp"
#include "dpgrad/gradient.hpp"
#include "dpgrad/privacy.hpp"

namespace dpgrad {

/// Inputs to the closed-form error model of clipping under noise.
struct ClippingModelInputs {
  double g_norm = 0.0;  // ||g||_2 estimate, >= 0
  std::size_t dim = 1;  // parameter count m
  double sigma = 0.0;   // noise multiplier
};

/// max(0, ||g|| - C)^2 + m C^2 sigma^2, with the shortfall clamped before
/// squaring so the value is 0 when C >= ||g|| and sigma == 0.
double approx_error(double clip_radius, const ClippingModelInputs& in);

/// The unclamped quadratic (||g|| - C)^2 + m C^2 sigma^2; equals
/// approx_error whenever C <= ||g||, and is strictly convex in C.
double differentiable_approx_error(double clip_radius,
                                   const ClippingModelInputs& in);

/// Closed-form argmin of the differentiable model: ||g|| / (1 + m sigma^2).
/// g_norm == 0 is degenerate and reports 0 with the flag set.
struct OptimalClipping {
  double c_star = 0.0;
  bool degenerate = false;
};
OptimalClipping optimal_clipping(const ClippingModelInputs& in);

/// Which statistic of the batch informs the model's g_norm.
enum class NormEstimator { median_row_norm, mean_gradient_norm };

struct SweepPoint {
  double clip_radius = 0.0;
  ErrorReport report;       // empirical, clip(+noise)(+compress) mechanism
  double model_error = 0.0; // differentiable model at this radius
};

struct SweepResult {
  std::vector<SweepPoint> points;
  double c_star = 0.0;
  double g_norm_used = 0.0;
  double median_row_norm = 0.0;
  NormEstimator estimator = NormEstimator::median_row_norm;
};

/// Geometric grid of `points` radii from lo to hi inclusive.
std::vector<double> geometric_grid(double lo, double hi, std::size_t points);

/// One estimate_mse per grid radius using the clip(+noise)(+compress)
/// mechanism at the given sigma, plus the model curve and C* for overlay.
/// `compressor` may be null (clip+noise only). The grid must be strictly
/// increasing. Points run under the supplied policy with per-point streams.
SweepResult sweep_empirical(const SampleBatchGradients& batch, double sigma,
                            const Compressor* compressor,
                            const std::vector<double>& clip_grid, int n,
                            const RngStream& base_stream,
                            NormEstimator estimator,
                            ExecPolicy policy = {});

/// Median of per-row L2 norms (the first-iteration heuristic the sweep
/// compares against).
double median_row_norm(const SampleBatchGradients& batch);

}  // namespace dpgrad

#endif  // DPGRAD_CLIPPING_HPP_
