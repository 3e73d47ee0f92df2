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

#ifndef DPGRAD_PRIVACY_HPP_
#define DPGRAD_PRIVACY_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "dpgrad/gradient.hpp"
#include "dpgrad/rng.hpp"

namespace dpgrad {

/// Where Gaussian noise enters the batch mechanism. per_sample adds
/// independent noise to every clipped sample before averaging; on_sum adds a
/// single noise draw to the clipped sum (classic DPSGD).
enum class NoisePlacement { per_sample, on_sum };

struct PrivacyParams {
  double clip_radius = 1.0;        // C > 0
  double noise_multiplier = 0.0;   // sigma >= 0
  double delta = 1e-5;             // 0 < delta < 1
  NoisePlacement placement = NoisePlacement::per_sample;

  /// Throws InvalidParameter when a field is out of range.
  void validate() const;
};

/// Accumulated privacy cost. epsilon is infinity when sigma == 0.
struct PrivacySpend {
  std::uint64_t steps = 0;
  double epsilon = 0.0;
  double delta = 0.0;
};

/// Clips each sample to params.clip_radius, adds Gaussian noise with
/// per-coordinate standard deviation sigma*C according to params.placement,
/// and returns the per-sample results without averaging. Draw order is
/// row-major, so results are bit-reproducible for a fixed stream.
SampleBatchGradients privatize_samples(const SampleBatchGradients& batch,
                                       const PrivacyParams& params,
                                       RngStream& rng);

/// The batch mechanism: clip + noise per params, then average the rows.
/// With sigma == 0 this is exactly mean(clipped rows) and is deterministic.
GradientVector privatize_batch(const SampleBatchGradients& batch,
                               const PrivacyParams& params, RngStream& rng);

/// Renyi orders the accountant minimizes over: 1.5, 2..64, 128, 256.
std::span<const double> default_rdp_orders();

/// (epsilon, argmin order) for `steps` compositions of the Gaussian
/// mechanism at noise multiplier sigma, converted to (epsilon, delta)-DP:
/// min over orders a of steps*a/(2 sigma^2) + ln(1/delta)/(a-1).
/// steps == 0 spends nothing; sigma == 0 yields infinity.
struct EpsilonAtOrder {
  double epsilon = 0.0;
  double order = 0.0;  // 0 when epsilon is 0 or infinite
};
EpsilonAtOrder rdp_epsilon_argmin(double sigma, std::uint64_t steps,
                                  double delta,
                                  std::span<const double> orders = {});
double rdp_epsilon(double sigma, std::uint64_t steps, double delta,
                   std::span<const double> orders = {});

/// Privacy spend after `steps` steps of the configured mechanism.
PrivacySpend spend_after(const PrivacyParams& params, std::uint64_t steps);

/// Minimal admissible delta for the one-shot Gaussian mechanism at (sigma,
/// epsilon): (4/5) exp(-(sigma*epsilon)^2 / 2). Stated for 0 < epsilon < 1;
/// throws DomainError outside that interval.
double delta_floor(double sigma, double epsilon);

/// Order-of-1/n heuristic for choosing delta from the training-set size.
double delta_heuristic(std::size_t train_size);

}  // namespace dpgrad

#endif  // DPGRAD_PRIVACY_HPP_
