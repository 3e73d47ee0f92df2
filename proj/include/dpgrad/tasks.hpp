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

#ifndef DPGRAD_TASKS_HPP_
#define DPGRAD_TASKS_HPP_

#include <cstdint>
#include <vector>

#include "dpgrad/gradient.hpp"
#include "dpgrad/rng.hpp"

namespace dpgrad {

enum class TaskKind { gaussian_blobs, two_rings, synthetic_gradient_oracle };

/// Seeded synthetic task. Regeneration from the same spec is deterministic
/// and the train/test splits use disjoint streams.
struct TaskSpec {
  TaskKind kind = TaskKind::gaussian_blobs;
  int classes = 2;
  int dim = 16;
  int train_size = 2000;
  int test_size = 500;
  std::uint64_t seed = 1;
  double separation = 4.0;  // gaussian-blobs: distance between class means
  double noise = 0.1;       // two-rings: radial jitter

  void validate() const;
};

/// Row-major features with integer labels.
struct Dataset {
  int dim = 0;
  std::vector<double> features;  // n x dim
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> sample(std::size_t i) const {
    return std::span<const double>(features).subspan(
        i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim));
  }
};

enum class Split { train, test };

/// Generates the requested split. Oracle tasks have no dataset and throw
/// InvalidParameter here.
Dataset generate_dataset(const TaskSpec& spec, Split split);

/// Prescribed-gradient stream for exact error analysis: every batch row is
/// true_gradient + perturbation * N(0, I).
struct OracleSpec {
  GradientVector true_gradient;
  double perturbation = 1.0;
  std::size_t batch_size = 16;
};

SampleBatchGradients oracle_batch(const OracleSpec& spec, RngStream& rng);

/// `steps` batches, batch t drawn from base_stream.fork(t).
std::vector<SampleBatchGradients> oracle_stream(const OracleSpec& spec,
                                                std::size_t steps,
                                                const RngStream& base_stream);

/// Convenience fixture: a gradient with `spike_count` coordinates of
/// magnitude `spike_magnitude` (alternating sign, evenly spaced) and zeros
/// elsewhere, over a single flat layer of size dim.
GradientVector make_spike_gradient(std::size_t dim, std::size_t spike_count,
                                   double spike_magnitude);

}  // namespace dpgrad

#endif  // DPGRAD_TASKS_HPP_
