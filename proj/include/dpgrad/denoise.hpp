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

#ifndef DPGRAD_DENOISE_HPP_
#define DPGRAD_DENOISE_HPP_

#include "dpgrad/compression.hpp"
#include "dpgrad/gradient.hpp"
#include "dpgrad/privacy.hpp"
#include "dpgrad/rng.hpp"

namespace dpgrad {

/// Which branch wins when both candidate residual norms are equal.
/// `velocity` matches the <= comparison in the reference procedure.
enum class DenoiseTieBreak { velocity, acceleration };

struct DenoiseConfig {
  double beta = 0.9;   // momentum decay, in [0, 1)
  double gamma = 0.9;  // residual decay, in [0, 1]
  PrivacyParams privacy;
  DenoiseTieBreak tie_break = DenoiseTieBreak::velocity;

  void validate() const;
};

/// Sender/receiver velocities and the decayed residual, all zero-initialized.
struct DenoiseState {
  GradientVector v_sender;
  GradientVector v_receiver;
  GradientVector residual;

  static DenoiseState zeros(LayoutPtr layout);
};

enum class DenoiseFlag { velocity, acceleration };

/// The transmitted unit: a one-bit flag plus the compressed payload.
struct DenoiseMessage {
  DenoiseFlag flag = DenoiseFlag::velocity;
  MessagePayload payload;
};

struct DenoiseStepResult {
  DenoiseMessage message;
  DenoiseState state;
  double residual_norm_velocity = 0.0;
  double residual_norm_acceleration = 0.0;
};

/// Per-sample clip + noise + second whole-vector clip to the same radius.
/// Every returned row has norm <= C exactly. Exposed so the second-clipping
/// bound is directly testable.
SampleBatchGradients second_clipped_samples(const SampleBatchGradients& batch,
                                            const PrivacyParams& params,
                                            RngStream& rng);

/// One Denoise round:
///  1. per-sample DP mechanism, then a second clip of each noised sample;
///  2. v_sender <- beta v_sender + (1-beta) mean(samples);
///  3. a <- v_sender - v_receiver;
///  4. compress v_sender + gamma r and a + gamma r (velocity first);
///  5. transmit whichever branch left the smaller residual norm, update r
///     and v_receiver for that branch (velocity replaces the receiver
///     velocity, acceleration adds to it).
/// The input state is untouched; the updated state is returned.
DenoiseStepResult denoise_step(const SampleBatchGradients& batch,
                               const DenoiseConfig& config,
                               const DenoiseState& state,
                               Compressor& compressor, RngStream& rng);

/// Receiver update rule: velocity messages replace the receiver velocity,
/// acceleration messages add the decompressed payload to it.
GradientVector receiver_apply(const DenoiseMessage& message,
                              const GradientVector& v_receiver);

}  // namespace dpgrad

#endif  // DPGRAD_DENOISE_HPP_
