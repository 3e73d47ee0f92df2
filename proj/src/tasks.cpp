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

#include "dpgrad/tasks.hpp"

#include <cmath>
#include <numbers>

#include "dpgrad/errors.hpp"

namespace dpgrad {

void TaskSpec::validate() const {
  if (classes < 2) throw InvalidParameter("task: at least 2 classes");
  if (dim < 1) throw InvalidParameter("task: dim >= 1 required");
  if (train_size < 1 || test_size < 1) {
    throw InvalidParameter("task: split sizes must be positive");
  }
  if (kind == TaskKind::two_rings && classes != 2) {
    throw InvalidParameter("two-rings task is binary");
  }
  if (kind == TaskKind::gaussian_blobs && classes > dim) {
    throw InvalidParameter("gaussian-blobs: needs dim >= classes");
  }
}

namespace {

Dataset generate_blobs(const TaskSpec& spec, int n, RngStream& rng) {
  Dataset data;
  data.dim = spec.dim;
  data.features.resize(static_cast<std::size_t>(n) * spec.dim);
  data.labels.resize(n);
  // Class c sits at separation/sqrt(2) along axis c, so any two means are
  // `separation` apart under unit covariance.
  const double scale = spec.separation / std::numbers::sqrt2;
  for (int i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng.below(spec.classes));
    data.labels[static_cast<std::size_t>(i)] = label;
    double* row = data.features.data() + static_cast<std::size_t>(i) * spec.dim;
    for (int d = 0; d < spec.dim; ++d) {
      row[d] = rng.normal() + (d == label ? scale : 0.0);
    }
  }
  return data;
}

Dataset generate_rings(const TaskSpec& spec, int n, RngStream& rng) {
  Dataset data;
  data.dim = spec.dim;
  data.features.resize(static_cast<std::size_t>(n) * spec.dim);
  data.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng.below(2));
    data.labels[static_cast<std::size_t>(i)] = label;
    const double radius = (label == 0 ? 1.0 : 2.0) + spec.noise * rng.normal();
    const double angle = 2.0 * std::numbers::pi * rng.uniform();
    double* row = data.features.data() + static_cast<std::size_t>(i) * spec.dim;
    row[0] = radius * std::cos(angle);
    if (spec.dim > 1) row[1] = radius * std::sin(angle);
    for (int d = 2; d < spec.dim; ++d) row[d] = 0.05 * rng.normal();
  }
  return data;
}

}  // namespace

Dataset generate_dataset(const TaskSpec& spec, Split split) {
  spec.validate();
  if (spec.kind == TaskKind::synthetic_gradient_oracle) {
    throw InvalidParameter("oracle task has no dataset; use oracle_batch");
  }
  const int n = split == Split::train ? spec.train_size : spec.test_size;
  RngStream rng = RngStream::labeled(
      spec.seed, split == Split::train ? "task/train" : "task/test");
  switch (spec.kind) {
    case TaskKind::gaussian_blobs:
      return generate_blobs(spec, n, rng);
    case TaskKind::two_rings:
      return generate_rings(spec, n, rng);
    case TaskKind::synthetic_gradient_oracle:
      break;
  }
  throw InvalidParameter("unknown task kind");
}

SampleBatchGradients oracle_batch(const OracleSpec& spec, RngStream& rng) {
  if (spec.batch_size == 0) {
    throw InvalidParameter("oracle_batch: B >= 1 required");
  }
  SampleBatchGradients batch(spec.true_gradient.layout_ptr(), spec.batch_size);
  const auto g = spec.true_gradient.values();
  for (std::size_t i = 0; i < spec.batch_size; ++i) {
    auto row = batch.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] = g[j] + (spec.perturbation > 0.0
                           ? spec.perturbation * rng.normal()
                           : 0.0);
    }
  }
  return batch;
}

std::vector<SampleBatchGradients> oracle_stream(const OracleSpec& spec,
                                                std::size_t steps,
                                                const RngStream& base_stream) {
  std::vector<SampleBatchGradients> batches;
  batches.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    RngStream rng = base_stream.fork(t);
    batches.push_back(oracle_batch(spec, rng));
  }
  return batches;
}

GradientVector make_spike_gradient(std::size_t dim, std::size_t spike_count,
                                   double spike_magnitude) {
  if (dim == 0) throw InvalidParameter("make_spike_gradient: dim >= 1");
  if (spike_count > dim) {
    throw InvalidParameter("make_spike_gradient: more spikes than coordinates");
  }
  GradientVector g = GradientVector::zeros(Layout::flat(dim));
  if (spike_count == 0) return g;
  const std::size_t stride = dim / spike_count;
  for (std::size_t s = 0; s < spike_count; ++s) {
    g[s * stride] = (s % 2 == 0 ? spike_magnitude : -spike_magnitude);
  }
  return g;
}

}  // namespace dpgrad
