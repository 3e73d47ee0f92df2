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

#ifndef DPGRAD_MODELS_HPP_
#define DPGRAD_MODELS_HPP_

#include <span>
#include <vector>

#include "dpgrad/gradient.hpp"
#include "dpgrad/rng.hpp"
#include "dpgrad/tasks.hpp"

namespace dpgrad {

enum class ModelKind { logistic_regression, mlp_1_hidden };

struct ModelSpec {
  ModelKind kind = ModelKind::logistic_regression;
  int input_dim = 16;
  int classes = 2;
  int hidden = 16;  // mlp only

  void validate() const;
};

/// Softmax classifier with hand-derived per-sample gradients. The parameter
/// layout is
///   logistic-regression: weights (dim x classes), bias (classes)
///   mlp-1-hidden: w1 (dim x hidden), b1 (hidden), w2 (hidden x classes),
///                 b2 (classes), tanh activation.
/// Weight matrices are stored input-major: w[i*out + j] connects input i to
/// output j.
class Model {
 public:
  explicit Model(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  const LayoutPtr& layout() const { return layout_; }
  std::size_t parameter_count() const { return layout_->total_size(); }

  /// Small-Gaussian parameter init, deterministic per stream.
  GradientVector init_parameters(RngStream& rng) const;

  /// Cross-entropy loss of a single sample. Throws NumericError (naming the
  /// sample index, when provided) on non-finite activations.
  double sample_loss(const GradientVector& params, std::span<const double> x,
                     int label, long sample_index = -1) const;

  /// Exact per-sample cross-entropy gradients for the index range
  /// [begin, end) of the dataset; row i of the result corresponds to sample
  /// indices[begin + i].
  SampleBatchGradients per_sample_gradients(const GradientVector& params,
                                            const Dataset& data,
                                            std::span<const int> indices) const;

  int predict(const GradientVector& params, std::span<const double> x) const;
  double accuracy(const GradientVector& params, const Dataset& data) const;

 private:
  ModelSpec spec_;
  LayoutPtr layout_;
};

}  // namespace dpgrad

#endif  // DPGRAD_MODELS_HPP_
