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

#include "dpgrad/privacy.hpp"

#include <cmath>
#include <limits>

#include "dpgrad/errors.hpp"

namespace dpgrad {

void PrivacyParams::validate() const {
  if (!(clip_radius > 0.0) || !std::isfinite(clip_radius)) {
    throw InvalidParameter("PrivacyParams: clip radius must be positive");
  }
  if (!(noise_multiplier >= 0.0) || !std::isfinite(noise_multiplier)) {
    throw InvalidParameter("PrivacyParams: noise multiplier must be >= 0");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidParameter("PrivacyParams: delta must lie in (0, 1)");
  }
}

SampleBatchGradients privatize_samples(const SampleBatchGradients& batch,
                                       const PrivacyParams& params,
                                       RngStream& rng) {
  params.validate();
  const double noise_std = params.noise_multiplier * params.clip_radius;
  SampleBatchGradients out(batch.layout_ptr(), batch.batch_size());
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    auto src = batch.row(i);
    auto dst = out.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    sphere_project_in_place(dst, params.clip_radius);
    if (params.placement == NoisePlacement::per_sample && noise_std > 0.0) {
      for (double& x : dst) x += noise_std * rng.normal();
    }
  }
  return out;
}

GradientVector privatize_batch(const SampleBatchGradients& batch,
                               const PrivacyParams& params, RngStream& rng) {
  GradientVector mean = mean_gradient(privatize_samples(batch, params, rng));
  const double noise_std = params.noise_multiplier * params.clip_radius;
  if (params.placement == NoisePlacement::on_sum && noise_std > 0.0) {
    // One draw on the sum, i.e. noise_std / B after averaging.
    const double scale = noise_std / static_cast<double>(batch.batch_size());
    for (double& x : mean.values()) x += scale * rng.normal();
  }
  return mean;
}

std::span<const double> default_rdp_orders() {
  static const std::vector<double> orders = [] {
    std::vector<double> o;
    o.push_back(1.5);
    for (int a = 2; a <= 64; ++a) o.push_back(static_cast<double>(a));
    o.push_back(128.0);
    o.push_back(256.0);
    return o;
  }();
  return orders;
}

EpsilonAtOrder rdp_epsilon_argmin(double sigma, std::uint64_t steps,
                                  double delta,
                                  std::span<const double> orders) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw InvalidParameter("rdp_epsilon: sigma must be >= 0");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidParameter("rdp_epsilon: delta must lie in (0, 1)");
  }
  if (steps == 0) return {0.0, 0.0};  // empty composition spends nothing
  if (sigma == 0.0) {
    return {std::numeric_limits<double>::infinity(), 0.0};
  }
  if (orders.empty()) orders = default_rdp_orders();
  const double log_inv_delta = std::log(1.0 / delta);
  EpsilonAtOrder best{std::numeric_limits<double>::infinity(), 0.0};
  for (double a : orders) {
    if (!(a > 1.0)) {
      throw InvalidParameter("rdp_epsilon: orders must exceed 1");
    }
    double eps = static_cast<double>(steps) * a / (2.0 * sigma * sigma) +
                 log_inv_delta / (a - 1.0);
    if (eps < best.epsilon) best = {eps, a};
  }
  return best;
}

double rdp_epsilon(double sigma, std::uint64_t steps, double delta,
                   std::span<const double> orders) {
  return rdp_epsilon_argmin(sigma, steps, delta, orders).epsilon;
}

PrivacySpend spend_after(const PrivacyParams& params, std::uint64_t steps) {
  params.validate();
  PrivacySpend spend;
  spend.steps = steps;
  spend.delta = params.delta;
  spend.epsilon = rdp_epsilon(params.noise_multiplier, steps, params.delta);
  return spend;
}

double delta_floor(double sigma, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw DomainError("delta_floor: bound is stated for 0 < epsilon < 1");
  }
  if (!(sigma > 0.0)) {
    throw InvalidParameter("delta_floor: sigma must be positive");
  }
  const double se = sigma * epsilon;
  return 0.8 * std::exp(-0.5 * se * se);
}

double delta_heuristic(std::size_t train_size) {
  if (train_size == 0) {
    throw InvalidParameter("delta_heuristic: training set must be non-empty");
  }
  return 1.0 / static_cast<double>(train_size);
}

}  // namespace dpgrad
