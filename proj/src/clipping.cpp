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

#include "dpgrad/clipping.hpp"

#include <algorithm>
#include <cmath>

#include "dpgrad/errors.hpp"

namespace dpgrad {

double approx_error(double clip_radius, const ClippingModelInputs& in) {
  if (!(clip_radius >= 0.0)) {
    throw InvalidParameter("approx_error: clip radius must be >= 0");
  }
  const double shortfall = std::max(0.0, in.g_norm - clip_radius);
  return shortfall * shortfall + static_cast<double>(in.dim) * clip_radius *
                                     clip_radius * in.sigma * in.sigma;
}

double differentiable_approx_error(double clip_radius,
                                   const ClippingModelInputs& in) {
  if (!(clip_radius >= 0.0)) {
    throw InvalidParameter("differentiable_approx_error: clip radius must be >= 0");
  }
  const double gap = in.g_norm - clip_radius;
  return gap * gap + static_cast<double>(in.dim) * clip_radius * clip_radius *
                         in.sigma * in.sigma;
}

OptimalClipping optimal_clipping(const ClippingModelInputs& in) {
  if (!(in.g_norm >= 0.0)) {
    throw InvalidParameter("optimal_clipping: g_norm must be >= 0");
  }
  if (in.dim == 0) throw InvalidParameter("optimal_clipping: m must be >= 1");
  if (in.g_norm == 0.0) return OptimalClipping{0.0, true};
  const double denom =
      1.0 + static_cast<double>(in.dim) * in.sigma * in.sigma;
  return OptimalClipping{in.g_norm / denom, false};
}

std::vector<double> geometric_grid(double lo, double hi, std::size_t points) {
  if (!(lo > 0.0) || !(hi > lo)) {
    throw InvalidParameter("geometric_grid: need 0 < lo < hi");
  }
  if (points < 2) throw InvalidParameter("geometric_grid: need >= 2 points");
  std::vector<double> grid(points);
  const double step = std::log(hi / lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = lo * std::exp(step * static_cast<double>(i));
  }
  grid.back() = hi;
  return grid;
}

double median_row_norm(const SampleBatchGradients& batch) {
  std::vector<double> norms(batch.batch_size());
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    double sum = 0.0;
    for (double x : batch.row(i)) sum += x * x;
    norms[i] = std::sqrt(sum);
  }
  std::sort(norms.begin(), norms.end());
  const std::size_t b = norms.size();
  return (b % 2 == 1) ? norms[b / 2]
                      : 0.5 * (norms[b / 2 - 1] + norms[b / 2]);
}

SweepResult sweep_empirical(const SampleBatchGradients& batch, double sigma,
                            const Compressor* compressor,
                            const std::vector<double>& clip_grid, int n,
                            const RngStream& base_stream,
                            NormEstimator estimator, ExecPolicy policy) {
  if (clip_grid.empty()) {
    throw InvalidParameter("sweep_empirical: empty clip grid");
  }
  for (std::size_t i = 0; i < clip_grid.size(); ++i) {
    if (!(clip_grid[i] > 0.0)) {
      throw InvalidParameter("sweep_empirical: clip radii must be positive");
    }
    if (i > 0 && !(clip_grid[i] > clip_grid[i - 1])) {
      throw InvalidParameter("sweep_empirical: grid must be strictly increasing");
    }
  }
  if (n < 2) throw InvalidParameter("sweep_empirical: n >= 2 required");

  SweepResult result;
  result.estimator = estimator;
  result.median_row_norm = median_row_norm(batch);
  result.g_norm_used = estimator == NormEstimator::median_row_norm
                           ? result.median_row_norm
                           : l2_norm(mean_gradient(batch));
  ClippingModelInputs model{result.g_norm_used, batch.dim(), sigma};
  result.c_star = optimal_clipping(model).c_star;

  result.points.resize(clip_grid.size());
  for (std::size_t i = 0; i < clip_grid.size(); ++i) {
    PrivacyParams params;
    params.clip_radius = clip_grid[i];
    params.noise_multiplier = sigma;
    EstimatorMechanism mechanism =
        compressor ? clip_noise_compress_mechanism(params, *compressor)
                   : clip_noise_mechanism(params);
    SweepPoint& point = result.points[i];
    point.clip_radius = clip_grid[i];
    point.model_error = differentiable_approx_error(clip_grid[i], model);
    point.report =
        estimate_mse(mechanism, batch, n, base_stream.fork(i), policy);
  }
  return result;
}

}  // namespace dpgrad
