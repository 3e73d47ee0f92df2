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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "dpgrad/errors.hpp"
#include "dpgrad/harness.hpp"
#include "helpers.hpp"

using namespace dpgrad;
using dpgrad::testing::rel_err;
using dpgrad::testing::vec;

namespace {

TaskSpec blobs_task() {
  TaskSpec task;
  task.kind = TaskKind::gaussian_blobs;
  task.classes = 2;
  task.dim = 16;
  task.train_size = 2000;
  task.test_size = 500;
  task.seed = 11;
  task.separation = 4.0;
  return task;
}

ModelSpec logreg_spec(const TaskSpec& task) {
  ModelSpec model;
  model.kind = ModelKind::logistic_regression;
  model.input_dim = task.dim;
  model.classes = task.classes;
  return model;
}

// Central finite differences of the per-sample loss.
std::vector<double> finite_difference_gradient(const Model& model,
                                               const GradientVector& params,
                                               const Dataset& data,
                                               std::size_t sample,
                                               double step) {
  std::vector<double> grad(params.size());
  GradientVector probe = params;
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double saved = probe[j];
    probe[j] = saved + step;
    const double up =
        model.sample_loss(probe, data.sample(sample), data.labels[sample]);
    probe[j] = saved - step;
    const double down =
        model.sample_loss(probe, data.sample(sample), data.labels[sample]);
    probe[j] = saved;
    grad[j] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace

TEST_CASE("deterministic dataset regeneration with disjoint splits") {
  TaskSpec task = blobs_task();
  Dataset a = generate_dataset(task, Split::train);
  Dataset b = generate_dataset(task, Split::train);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  Dataset test = generate_dataset(task, Split::test);
  CHECK(test.size() == 500);
  CHECK(a.features != test.features);
}

TEST_CASE("per-sample gradients match central finite differences") {
  TaskSpec task = blobs_task();
  task.train_size = 8;
  Dataset data = generate_dataset(task, Split::train);

  SUBCASE("logistic regression") {
    Model model(logreg_spec(task));
    RngStream rng(1, 1);
    GradientVector params = model.init_parameters(rng);
    std::vector<int> indices{3};
    SampleBatchGradients grads =
        model.per_sample_gradients(params, data, indices);
    std::vector<double> fd =
        finite_difference_gradient(model, params, data, 3, 1e-5);
    auto row = grads.row(0);
    for (std::size_t j = 0; j < fd.size(); ++j) {
      const double scale = std::max({std::fabs(fd[j]), std::fabs(row[j]), 1e-6});
      CHECK(std::fabs(row[j] - fd[j]) / scale <= 1e-4);
    }
  }
  SUBCASE("one-hidden-layer mlp") {
    ModelSpec spec;
    spec.kind = ModelKind::mlp_1_hidden;
    spec.input_dim = task.dim;
    spec.classes = task.classes;
    spec.hidden = 5;
    Model model(spec);
    RngStream rng(1, 2);
    GradientVector params = model.init_parameters(rng);
    std::vector<int> indices{5};
    SampleBatchGradients grads =
        model.per_sample_gradients(params, data, indices);
    std::vector<double> fd =
        finite_difference_gradient(model, params, data, 5, 1e-5);
    auto row = grads.row(0);
    for (std::size_t j = 0; j < fd.size(); ++j) {
      const double scale = std::max({std::fabs(fd[j]), std::fabs(row[j]), 1e-6});
      CHECK(std::fabs(row[j] - fd[j]) / scale <= 1e-4);
    }
  }
}

TEST_CASE("duplicated samples produce identical gradient rows") {
  TaskSpec task = blobs_task();
  task.train_size = 4;
  Dataset data = generate_dataset(task, Split::train);
  Model model(logreg_spec(task));
  RngStream rng(2, 1);
  GradientVector params = model.init_parameters(rng);
  std::vector<int> indices{2, 2};
  SampleBatchGradients grads = model.per_sample_gradients(params, data, indices);
  auto first = grads.row(0);
  auto second = grads.row(1);
  for (std::size_t j = 0; j < first.size(); ++j) {
    CHECK(first[j] == second[j]);
  }
}

TEST_CASE("zero input features leave only the bias gradient") {
  Dataset data;
  data.dim = 3;
  data.features = {0.0, 0.0, 0.0};
  data.labels = {1};
  ModelSpec spec;
  spec.kind = ModelKind::logistic_regression;
  spec.input_dim = 3;
  spec.classes = 2;
  Model model(spec);
  RngStream rng(3, 1);
  GradientVector params = model.init_parameters(rng);
  std::vector<int> indices{0};
  SampleBatchGradients grads = model.per_sample_gradients(params, data, indices);
  auto row = grads.row(0);
  const LayerSpec& weights = model.layout()->layer(0);
  const LayerSpec& bias = model.layout()->layer(1);
  for (std::size_t j = 0; j < weights.size; ++j) {
    CHECK(row[weights.offset + j] == 0.0);
  }
  double bias_norm = 0.0;
  for (std::size_t j = 0; j < bias.size; ++j) {
    bias_norm += row[bias.offset + j] * row[bias.offset + j];
  }
  CHECK(bias_norm > 0.0);
}

TEST_CASE("oracle stream hands back the prescribed gradient") {
  GradientVector g = vec({0.5, -1.0, 2.0});
  OracleSpec spec{g, 0.0, 3};
  RngStream rng(4, 1);
  SampleBatchGradients batch = oracle_batch(spec, rng);
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    auto row = batch.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      CHECK(row[j] == g[j]);
    }
  }
}

TEST_CASE("oracle batch means converge to g at rate scale over sqrt(B)") {
  GradientVector g = vec(std::vector<double>(32, 0.25));
  const double scale = 0.8;
  OracleSpec spec{g, scale, 64};
  RngStream base(5, 0);
  const int batches = 1000;
  double mean_sq_dev = 0.0;
  for (int t = 0; t < batches; ++t) {
    RngStream rng = base.fork(t);
    GradientVector mean = mean_gradient(oracle_batch(spec, rng));
    mean_sq_dev += squared_distance(mean, g);
  }
  mean_sq_dev /= batches;
  const double expected =
      32.0 * scale * scale / static_cast<double>(spec.batch_size);
  CHECK(rel_err(mean_sq_dev, expected) < 0.1);
}

TEST_CASE("plain training on separable blobs reaches 0.90 accuracy") {
  TaskSpec task = blobs_task();
  PipelineConfig pipeline;
  pipeline.clip_mode = ClipMode::disabled;
  RunRecord record =
      run_training(task, logreg_spec(task), pipeline, 20, 0.5, 64, 99);
  CHECK(!record.aborted);
  CHECK(record.final_accuracy >= 0.90);
}

TEST_CASE("inactive clipping reproduces the disabled pipeline bit-for-bit") {
  TaskSpec task = blobs_task();
  task.train_size = 400;
  task.test_size = 100;

  PipelineConfig identity;
  identity.clip_mode = ClipMode::disabled;
  PipelineConfig huge_clip;
  huge_clip.clip_mode = ClipMode::fixed;
  huge_clip.clip_radius = 1e12;

  RunRecord a = run_training(task, logreg_spec(task), identity, 6, 0.5, 32, 7);
  RunRecord b = run_training(task, logreg_spec(task), huge_clip, 6, 0.5, 32, 7);
  REQUIRE(a.epochs.size() == b.epochs.size());
  for (std::size_t e = 0; e < a.epochs.size(); ++e) {
    CHECK(a.epochs[e].accuracy == b.epochs[e].accuracy);
    CHECK(a.epochs[e].cumulative_bytes == b.epochs[e].cumulative_bytes);
  }
  CHECK(a.final_accuracy == b.final_accuracy);
}

TEST_CASE("identical configurations and seeds give identical records") {
  TaskSpec task = blobs_task();
  task.train_size = 300;
  task.test_size = 100;
  PipelineConfig pipeline;
  pipeline.sigma = 0.4;
  pipeline.clip_mode = ClipMode::median;
  pipeline.compress = CompressKind::topk;
  pipeline.rate = 4.0;

  RunRecord a = run_training(task, logreg_spec(task), pipeline, 4, 0.3, 32, 5);
  RunRecord b = run_training(task, logreg_spec(task), pipeline, 4, 0.3, 32, 5);
  REQUIRE(a.epochs.size() == b.epochs.size());
  for (std::size_t e = 0; e < a.epochs.size(); ++e) {
    CHECK(a.epochs[e].accuracy == b.epochs[e].accuracy);
    CHECK(a.epochs[e].cumulative_bytes == b.epochs[e].cumulative_bytes);
    CHECK(a.epochs[e].epsilon == b.epochs[e].epsilon);
  }
  CHECK(a.resolved_clip == b.resolved_clip);

  // final accuracy = mean of the last min(10, epochs) per-epoch accuracies
  double window_mean = 0.0;
  for (const EpochStat& stat : a.epochs) window_mean += stat.accuracy;
  window_mean /= static_cast<double>(a.epochs.size());  // 4 epochs < 10
  CHECK(a.final_accuracy == doctest::Approx(window_mean).epsilon(1e-15));
}

TEST_CASE("divergent runs abort with a flagged partial record") {
  TaskSpec task = blobs_task();
  task.train_size = 200;
  task.test_size = 50;
  task.separation = 8.0;
  PipelineConfig pipeline;
  pipeline.clip_mode = ClipMode::disabled;
  // A learning rate at the double range limit overflows the update or the
  // following forward pass within a couple of steps.
  ModelSpec mlp;
  mlp.kind = ModelKind::mlp_1_hidden;
  mlp.input_dim = task.dim;
  mlp.classes = task.classes;
  mlp.hidden = 8;
  RunRecord record = run_training(task, mlp, pipeline, 3, 1e308, 16, 2);
  CHECK(record.aborted);
  CHECK(record.epochs.size() <= 3);
}

TEST_CASE("bandwidth accounting is additive and epsilon matches the accountant") {
  TaskSpec task = blobs_task();
  task.train_size = 256;
  task.test_size = 64;
  PipelineConfig pipeline;
  pipeline.sigma = 0.8;
  pipeline.clip_mode = ClipMode::median;
  pipeline.compress = CompressKind::topk;
  pipeline.rate = 4.0;

  const int epochs = 3;
  const int batch = 32;
  RunRecord record =
      run_training(task, logreg_spec(task), pipeline, epochs, 0.2, batch, 13);

  const std::uint64_t steps_per_epoch = 256 / batch;
  CHECK(record.spend.steps == steps_per_epoch * epochs);

  // Per-step cost is constant for top-k: k = floor(layer/m) per layer.
  Model model(logreg_spec(task));
  std::uint64_t per_step = 0;
  for (const LayerSpec& layer : model.layout()->layers()) {
    const std::uint64_t k = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(layer.size / 4));
    per_step += 8 + k * (4 + 2);
  }
  CHECK(record.total_bytes == per_step * record.spend.steps);

  double prev_eps = 0.0;
  for (const EpochStat& stat : record.epochs) {
    CHECK(stat.epsilon >= prev_eps);
    prev_eps = stat.epsilon;
  }
  CHECK(record.spend.epsilon ==
        doctest::Approx(rdp_epsilon(0.8, record.spend.steps,
                                    record.resolved_delta)));
  CHECK(record.resolved_delta == doctest::Approx(1.0 / 256.0));
}

TEST_CASE("oracle task has no dataset") {
  TaskSpec task;
  task.kind = TaskKind::synthetic_gradient_oracle;
  CHECK_THROWS_AS(generate_dataset(task, Split::train), InvalidParameter);
}

TEST_CASE("two-rings is learnable by the mlp but not by logreg") {
  TaskSpec task;
  task.kind = TaskKind::two_rings;
  task.classes = 2;
  task.dim = 2;
  task.train_size = 1500;
  task.test_size = 400;
  task.seed = 3;
  task.noise = 0.08;

  PipelineConfig pipeline;
  pipeline.clip_mode = ClipMode::disabled;

  ModelSpec logreg;
  logreg.kind = ModelKind::logistic_regression;
  logreg.input_dim = 2;
  logreg.classes = 2;
  RunRecord linear = run_training(task, logreg, pipeline, 12, 0.5, 32, 21);

  ModelSpec mlp;
  mlp.kind = ModelKind::mlp_1_hidden;
  mlp.input_dim = 2;
  mlp.classes = 2;
  mlp.hidden = 24;
  RunRecord nonlinear = run_training(task, mlp, pipeline, 30, 0.5, 32, 21);

  CHECK(linear.final_accuracy < 0.75);
  CHECK(nonlinear.final_accuracy > 0.85);
}
