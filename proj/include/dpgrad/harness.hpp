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

#ifndef DPGRAD_HARNESS_HPP_
#define DPGRAD_HARNESS_HPP_

#include <cstdint>
#include <vector>

#include "dpgrad/compression.hpp"
#include "dpgrad/denoise.hpp"
#include "dpgrad/models.hpp"
#include "dpgrad/privacy.hpp"
#include "dpgrad/tasks.hpp"

namespace dpgrad {

enum class CompressKind { none, topk, low_rank };

/// How the clipping radius is chosen for a run.
enum class ClipMode {
  disabled,  // no clipping; requires sigma == 0
  median,    // median per-sample gradient norm of the first minibatch
  fixed,     // explicit radius
};

/// Full per-run mechanism configuration (clip -> noise -> compress, or the
/// denoise pipeline which owns clip+noise itself).
struct PipelineConfig {
  double sigma = 0.0;
  ClipMode clip_mode = ClipMode::median;
  double clip_radius = 0.0;  // used when clip_mode == fixed
  double delta = 0.0;        // <= 0 selects the 1/train_size heuristic
  NoisePlacement placement = NoisePlacement::per_sample;

  CompressKind compress = CompressKind::none;
  double rate = 16.0;
  std::uint32_t rank = 1;
  PayloadBits payload_bits = PayloadBits::b16;
  int power_iterations = 1;
  bool error_feedback = true;

  bool denoise = false;
  double beta = 0.9;
  double gamma = 0.9;
  DenoiseTieBreak tie_break = DenoiseTieBreak::velocity;

  void validate() const;
};

struct EpochStat {
  double accuracy = 0.0;
  std::uint64_t cumulative_bytes = 0;
  double epsilon = 0.0;
};

struct RunRecord {
  std::vector<EpochStat> epochs;
  double final_accuracy = 0.0;  // mean of the last min(10, epochs) accuracies
  std::uint64_t total_bytes = 0;
  PrivacySpend spend;
  double resolved_clip = 0.0;  // 0 when clipping is disabled
  double resolved_delta = 0.0;
  bool aborted = false;  // loss diverged; record is partial
};

/// Minibatch SGD with the configured pipeline applied to every minibatch's
/// per-sample gradients. Accuracy is evaluated on the held-out test split
/// after each epoch; upstream bytes and the privacy spend accumulate per
/// step. Identical arguments produce bit-identical records.
RunRecord run_training(const TaskSpec& task, const ModelSpec& model_spec,
                       const PipelineConfig& pipeline, int epochs, double lr,
                       int batch_size, std::uint64_t seed);

}  // namespace dpgrad

#endif  // DPGRAD_HARNESS_HPP_
