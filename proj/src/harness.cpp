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

#include "dpgrad/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dpgrad/clipping.hpp"
#include "dpgrad/errors.hpp"

namespace dpgrad {

void PipelineConfig::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw InvalidParameter("pipeline: sigma must be >= 0");
  }
  if (sigma > 0.0 && clip_mode == ClipMode::disabled) {
    throw InvalidParameter("pipeline: noise requires a clipping radius");
  }
  if (clip_mode == ClipMode::fixed && !(clip_radius > 0.0)) {
    throw InvalidParameter("pipeline: fixed clip mode needs a positive radius");
  }
  if (compress == CompressKind::topk && !(rate >= 1.0)) {
    throw InvalidParameter("pipeline: top-k rate must be >= 1");
  }
  if (compress == CompressKind::low_rank && rank == 0) {
    throw InvalidParameter("pipeline: rank must be >= 1");
  }
  if (denoise) {
    if (clip_mode == ClipMode::disabled) {
      throw InvalidParameter("pipeline: denoise requires clipping");
    }
    if (!(beta >= 0.0 && beta < 1.0)) {
      throw InvalidParameter("pipeline: beta must lie in [0, 1)");
    }
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
      throw InvalidParameter("pipeline: gamma must lie in [0, 1]");
    }
  }
}

namespace {

std::unique_ptr<Compressor> build_compressor(const PipelineConfig& pipeline) {
  switch (pipeline.compress) {
    case CompressKind::none:
      return nullptr;
    case CompressKind::topk:
      return make_topk_compressor(pipeline.rate, pipeline.payload_bits);
    case CompressKind::low_rank:
      return make_low_rank_compressor(pipeline.rank, pipeline.power_iterations);
  }
  throw InvalidParameter("pipeline: unknown compress kind");
}

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

RunRecord run_training(const TaskSpec& task, const ModelSpec& model_spec,
                       const PipelineConfig& pipeline, int epochs, double lr,
                       int batch_size, std::uint64_t seed) {
  task.validate();
  pipeline.validate();
  if (epochs < 1) throw InvalidParameter("run_training: epochs >= 1 required");
  if (batch_size < 1) throw InvalidParameter("run_training: batch size >= 1");
  if (!(lr > 0.0)) throw InvalidParameter("run_training: lr must be positive");

  const Dataset train = generate_dataset(task, Split::train);
  const Dataset test = generate_dataset(task, Split::test);
  Model model(model_spec);

  RngStream init_rng = RngStream::labeled(seed, "train/init");
  GradientVector params = model.init_parameters(init_rng);

  RunRecord record;
  record.resolved_delta =
      pipeline.delta > 0.0 ? pipeline.delta : delta_heuristic(train.size());

  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  const RngStream shuffle_base = RngStream::labeled(seed, "train/shuffle");
  const RngStream step_base = RngStream::labeled(seed, "train/step");

  std::unique_ptr<Compressor> compressor = build_compressor(pipeline);
  CompressorState feedback(model.layout());
  DenoiseState denoise_state = DenoiseState::zeros(model.layout());
  std::unique_ptr<Compressor> denoise_compressor;
  if (pipeline.denoise) {
    denoise_compressor = pipeline.compress == CompressKind::none
                             ? make_topk_compressor(1.0, PayloadBits::b64)
                             : build_compressor(pipeline);
  }

  double resolved_clip = pipeline.clip_radius;
  bool clip_resolved = pipeline.clip_mode != ClipMode::median;

  std::uint64_t step = 0;
  std::uint64_t bytes = 0;
  for (int epoch = 0; epoch < epochs && !record.aborted; ++epoch) {
    RngStream shuffle_rng = shuffle_base.fork(static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(batch_size)) {
      const std::size_t count =
          std::min<std::size_t>(batch_size, order.size() - start);
      std::span<const int> indices(order.data() + start, count);
      SampleBatchGradients grads(model.layout(), count);
      try {
        grads = model.per_sample_gradients(params, train, indices);
      } catch (const NumericError&) {
        // Divergence: flag the record and keep what we have.
        record.aborted = true;
        break;
      }

      if (!clip_resolved) {
        // First-minibatch median-norm heuristic, frozen for the run.
        resolved_clip = median_row_norm(grads);
        if (!(resolved_clip > 0.0)) resolved_clip = 1.0;
        clip_resolved = true;
      }

      RngStream step_rng = step_base.fork(step);
      GradientVector update = GradientVector::zeros(model.layout());

      if (pipeline.denoise) {
        DenoiseConfig cfg;
        cfg.beta = pipeline.beta;
        cfg.gamma = pipeline.gamma;
        cfg.tie_break = pipeline.tie_break;
        cfg.privacy.clip_radius = resolved_clip;
        cfg.privacy.noise_multiplier = pipeline.sigma;
        cfg.privacy.delta = record.resolved_delta;
        DenoiseStepResult out = denoise_step(grads, cfg, denoise_state,
                                             *denoise_compressor, step_rng);
        denoise_state = std::move(out.state);
        update = denoise_state.v_receiver;
        bytes += coo_bytes(out.message.payload);
      } else {
        GradientVector estimate = GradientVector::zeros(model.layout());
        if (pipeline.clip_mode == ClipMode::disabled) {
          estimate = mean_gradient(grads);
        } else {
          PrivacyParams privacy;
          privacy.clip_radius = resolved_clip;
          privacy.noise_multiplier = pipeline.sigma;
          privacy.delta = record.resolved_delta;
          privacy.placement = pipeline.placement;
          estimate = privatize_batch(grads, privacy, step_rng);
        }
        if (compressor) {
          GradientVector input =
              pipeline.error_feedback ? estimate + feedback.residual : estimate;
          CompressOutcome outcome = compressor->compress(input, step_rng);
          if (pipeline.error_feedback) {
            feedback.residual = std::move(outcome.residual);
          }
          bytes += coo_bytes(outcome.message);
          update = decompress(outcome.message, model.layout());
        } else {
          bytes += dense_coo_bytes(*model.layout(), PayloadBits::b32);
          update = std::move(estimate);
        }
      }

      params -= update * lr;
      ++step;
      if (!all_finite(params.values())) {
        record.aborted = true;
        break;
      }
    }

    EpochStat stat;
    stat.cumulative_bytes = bytes;
    stat.epsilon = pipeline.sigma > 0.0
                       ? rdp_epsilon(pipeline.sigma, step, record.resolved_delta)
                       : std::numeric_limits<double>::infinity();
    stat.accuracy = record.aborted ? 0.0 : model.accuracy(params, test);
    record.epochs.push_back(stat);
  }

  record.total_bytes = bytes;
  record.resolved_clip =
      pipeline.clip_mode == ClipMode::disabled ? 0.0 : resolved_clip;
  record.spend.steps = step;
  record.spend.delta = record.resolved_delta;
  record.spend.epsilon =
      pipeline.sigma > 0.0
          ? rdp_epsilon(pipeline.sigma, step, record.resolved_delta)
          : std::numeric_limits<double>::infinity();

  const std::size_t window =
      std::min<std::size_t>(10, record.epochs.size());
  double acc = 0.0;
  for (std::size_t i = record.epochs.size() - window; i < record.epochs.size();
       ++i) {
    acc += record.epochs[i].accuracy;
  }
  record.final_accuracy = window > 0 ? acc / static_cast<double>(window) : 0.0;
  return record;
}

}  // namespace dpgrad
