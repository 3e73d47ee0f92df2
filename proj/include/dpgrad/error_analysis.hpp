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

#ifndef DPGRAD_ERROR_ANALYSIS_HPP_
#define DPGRAD_ERROR_ANALYSIS_HPP_

#include <array>
#include <functional>
#include <string>

#include "dpgrad/compression.hpp"
#include "dpgrad/gradient.hpp"
#include "dpgrad/privacy.hpp"
#include "dpgrad/rng.hpp"

namespace dpgrad {

/// Trial parallelism. Serial runs the plain reference loop; OpenMP runs the
/// same trial bodies across threads. Both produce bit-identical reports
/// because every trial draws from its own forked stream and the reduction is
/// always performed serially in trial order.
struct ExecPolicy {
  int threads = 0;  // 0 = library default (all available), 1 = serial reference

  static ExecPolicy serial() { return ExecPolicy{1}; }
  static ExecPolicy parallel(int threads = 0) { return ExecPolicy{threads}; }
};

/// A possibly stochastic estimator of the average gradient: consumes the
/// batch and draws only from the supplied stream.
struct EstimatorMechanism {
  std::string label;
  std::function<GradientVector(const SampleBatchGradients&, RngStream&)> fn;
};

/// n-trial Monte-Carlo error estimate against the clean empirical mean.
/// mse = bias_sq + variance holds to ~1e-10 relative by construction
/// (all three moments share the same n samples and 1/n normalization).
struct ErrorReport {
  double mse = 0.0;
  double bias_sq = 0.0;
  double variance = 0.0;
  int n = 0;
};

/// Draws n independent estimates g_i = F(batch), targets
/// g = mean_gradient(batch), and reports
///   mse      = (1/n) sum ||g_i - g||^2
///   bias_sq  = ||mean(g_i) - g||^2
///   variance = (1/n) sum ||g_i - mean(g_i)||^2.
/// Trial i draws from base_stream.fork(i). Throws InvalidParameter when n < 2.
ErrorReport estimate_mse(const EstimatorMechanism& mechanism,
                         const SampleBatchGradients& batch, int n,
                         const RngStream& base_stream,
                         ExecPolicy policy = {});

/// The three pipeline stages the error breakdown walks through.
enum class Stage { clip, clip_noise, clip_noise_compress };
std::string_view stage_label(Stage stage);

struct StageReport {
  Stage stage;
  ErrorReport report;
};

struct StageBreakdown {
  std::array<StageReport, 3> stages;
};

/// Per-stage breakdown sharing one target g = mean_gradient(batch):
/// stage 1 clips only, stage 2 clips and noises, stage 3 additionally
/// compresses and decompresses with a fresh compressor clone per trial
/// (single-shot compression error, no error-feedback dynamics).
/// `compressor` is a prototype; pass the compressor configured for the
/// pipeline under study.
StageBreakdown stage_breakdown(const PrivacyParams& params,
                               const Compressor& compressor,
                               const SampleBatchGradients& batch, int n,
                               const RngStream& base_stream,
                               ExecPolicy policy = {});

/// Mechanism factories for the three stages (exposed for reuse by sweeps).
EstimatorMechanism clip_mechanism(const PrivacyParams& params);
EstimatorMechanism clip_noise_mechanism(const PrivacyParams& params);
EstimatorMechanism clip_noise_compress_mechanism(const PrivacyParams& params,
                                                 const Compressor& compressor);

}  // namespace dpgrad

#endif  // DPGRAD_ERROR_ANALYSIS_HPP_
