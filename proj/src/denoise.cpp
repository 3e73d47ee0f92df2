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

#include "dpgrad/denoise.hpp"

#include <cmath>
#include <utility>

#include "dpgrad/errors.hpp"

namespace dpgrad {

void DenoiseConfig::validate() const {
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw InvalidParameter("denoise: beta must lie in [0, 1)");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw InvalidParameter("denoise: gamma must lie in [0, 1]");
  }
  privacy.validate();
}

DenoiseState DenoiseState::zeros(LayoutPtr layout) {
  return DenoiseState{GradientVector::zeros(layout),
                      GradientVector::zeros(layout),
                      GradientVector::zeros(layout)};
}

SampleBatchGradients second_clipped_samples(const SampleBatchGradients& batch,
                                            const PrivacyParams& params,
                                            RngStream& rng) {
  SampleBatchGradients noised = privatize_samples(batch, params, rng);
  for (std::size_t i = 0; i < noised.batch_size(); ++i) {
    sphere_project_in_place(noised.row(i), params.clip_radius);
  }
  return noised;
}

DenoiseStepResult denoise_step(const SampleBatchGradients& batch,
                               const DenoiseConfig& config,
                               const DenoiseState& state,
                               Compressor& compressor, RngStream& rng) {
  config.validate();
  if (config.privacy.placement != NoisePlacement::per_sample) {
    throw InvalidParameter("denoise_step: requires per-sample noise placement");
  }
  if (!same_layout(batch.layout_ptr(), state.v_sender.layout_ptr())) {
    throw LayoutError("denoise_step: state layout mismatch");
  }

  SampleBatchGradients clipped =
      second_clipped_samples(batch, config.privacy, rng);
  GradientVector mean = mean_gradient(clipped);

  GradientVector v_sender = state.v_sender * config.beta;
  v_sender += mean * (1.0 - config.beta);
  GradientVector acceleration = v_sender - state.v_receiver;

  GradientVector decayed_residual = state.residual * config.gamma;

  // Velocity branch is compressed first; the compressor may carry warm-start
  // state, so the call order is part of the deterministic contract.
  CompressOutcome velocity_out =
      compressor.compress(v_sender + decayed_residual, rng);
  CompressOutcome accel_out =
      compressor.compress(acceleration + decayed_residual, rng);

  const double norm_v = l2_norm(velocity_out.residual);
  const double norm_a = l2_norm(accel_out.residual);
  bool choose_velocity;
  if (config.tie_break == DenoiseTieBreak::velocity) {
    choose_velocity = norm_v <= norm_a;
  } else {
    choose_velocity = norm_v < norm_a;
  }

  DenoiseStepResult result{
      DenoiseMessage{},
      DenoiseState{std::move(v_sender), state.v_receiver, state.residual},
      norm_v, norm_a};
  if (choose_velocity) {
    result.message =
        DenoiseMessage{DenoiseFlag::velocity, std::move(velocity_out.message)};
    result.state.residual = std::move(velocity_out.residual);
  } else {
    result.message = DenoiseMessage{DenoiseFlag::acceleration,
                                    std::move(accel_out.message)};
    result.state.residual = std::move(accel_out.residual);
  }
  result.state.v_receiver =
      receiver_apply(result.message, state.v_receiver);
  return result;
}

GradientVector receiver_apply(const DenoiseMessage& message,
                              const GradientVector& v_receiver) {
  GradientVector payload = decompress(message.payload, v_receiver.layout_ptr());
  if (message.flag == DenoiseFlag::velocity) return payload;
  return v_receiver + payload;
}

}  // namespace dpgrad
