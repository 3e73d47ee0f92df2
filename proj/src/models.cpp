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

#include "dpgrad/models.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dpgrad/errors.hpp"

namespace dpgrad {

void ModelSpec::validate() const {
  if (input_dim < 1) throw InvalidParameter("model: input_dim >= 1 required");
  if (classes < 2) throw InvalidParameter("model: classes >= 2 required");
  if (kind == ModelKind::mlp_1_hidden && hidden < 1) {
    throw InvalidParameter("model: hidden width >= 1 required");
  }
}

namespace {

LayoutPtr build_layout(const ModelSpec& spec) {
  const std::size_t d = static_cast<std::size_t>(spec.input_dim);
  const std::size_t k = static_cast<std::size_t>(spec.classes);
  if (spec.kind == ModelKind::logistic_regression) {
    return Layout::make({{"weights", d * k}, {"bias", k}});
  }
  const std::size_t h = static_cast<std::size_t>(spec.hidden);
  return Layout::make(
      {{"w1", d * h}, {"b1", h}, {"w2", h * k}, {"b2", k}});
}

// logits -> probabilities in place, with max-shift for stability.
void softmax(std::vector<double>& z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

void check_finite(std::span<const double> values, long sample_index,
                  const char* where) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      std::string msg = std::string("non-finite activation in ") + where;
      if (sample_index >= 0) {
        msg += " at sample " + std::to_string(sample_index);
      }
      throw NumericError(msg);
    }
  }
}

struct Forward {
  std::vector<double> hidden;  // post-tanh, mlp only
  std::vector<double> probs;   // softmax output
};

Forward forward_pass(const ModelSpec& spec, const GradientVector& params,
                     std::span<const double> x, long sample_index) {
  const int d = spec.input_dim;
  const int k = spec.classes;
  Forward f;
  if (spec.kind == ModelKind::logistic_regression) {
    auto w = params.layer_values(0);
    auto b = params.layer_values(1);
    f.probs.assign(b.begin(), b.end());
    for (int i = 0; i < d; ++i) {
      const double xi = x[static_cast<std::size_t>(i)];
      if (xi == 0.0) continue;
      for (int j = 0; j < k; ++j) {
        f.probs[static_cast<std::size_t>(j)] += xi * w[static_cast<std::size_t>(i * k + j)];
      }
    }
  } else {
    const int h = spec.hidden;
    auto w1 = params.layer_values(0);
    auto b1 = params.layer_values(1);
    auto w2 = params.layer_values(2);
    auto b2 = params.layer_values(3);
    f.hidden.assign(b1.begin(), b1.end());
    for (int i = 0; i < d; ++i) {
      const double xi = x[static_cast<std::size_t>(i)];
      if (xi == 0.0) continue;
      for (int r = 0; r < h; ++r) {
        f.hidden[static_cast<std::size_t>(r)] += xi * w1[static_cast<std::size_t>(i * h + r)];
      }
    }
    for (double& v : f.hidden) v = std::tanh(v);
    f.probs.assign(b2.begin(), b2.end());
    for (int r = 0; r < h; ++r) {
      const double hr = f.hidden[static_cast<std::size_t>(r)];
      for (int j = 0; j < k; ++j) {
        f.probs[static_cast<std::size_t>(j)] += hr * w2[static_cast<std::size_t>(r * k + j)];
      }
    }
  }
  check_finite(f.probs, sample_index, "logits");
  softmax(f.probs);
  return f;
}

}  // namespace

Model::Model(ModelSpec spec) : spec_(spec) {
  spec_.validate();
  layout_ = build_layout(spec_);
}

GradientVector Model::init_parameters(RngStream& rng) const {
  std::vector<double> values(layout_->total_size());
  for (double& v : values) v = 0.1 * rng.normal();
  return GradientVector(layout_, std::move(values));
}

double Model::sample_loss(const GradientVector& params,
                          std::span<const double> x, int label,
                          long sample_index) const {
  Forward f = forward_pass(spec_, params, x, sample_index);
  const double p = f.probs[static_cast<std::size_t>(label)];
  return -std::log(std::max(p, 1e-300));
}

SampleBatchGradients Model::per_sample_gradients(
    const GradientVector& params, const Dataset& data,
    std::span<const int> indices) const {
  if (indices.empty()) {
    throw InvalidParameter("per_sample_gradients: empty minibatch");
  }
  if (data.dim != spec_.input_dim) {
    throw LayoutError("per_sample_gradients: dataset dimension mismatch");
  }
  const int d = spec_.input_dim;
  const int k = spec_.classes;
  SampleBatchGradients batch(layout_, indices.size());

  for (std::size_t row = 0; row < indices.size(); ++row) {
    const std::size_t sample = static_cast<std::size_t>(indices[row]);
    auto x = data.sample(sample);
    const int label = data.labels[sample];
    Forward f = forward_pass(spec_, params, x, static_cast<long>(sample));

    // dL/dz = p - onehot(y)
    std::vector<double> dz = f.probs;
    dz[static_cast<std::size_t>(label)] -= 1.0;

    auto out = batch.row(row);
    if (spec_.kind == ModelKind::logistic_regression) {
      const LayerSpec& wspec = layout_->layer(0);
      const LayerSpec& bspec = layout_->layer(1);
      for (int i = 0; i < d; ++i) {
        const double xi = x[static_cast<std::size_t>(i)];
        for (int j = 0; j < k; ++j) {
          out[wspec.offset + static_cast<std::size_t>(i * k + j)] =
              xi * dz[static_cast<std::size_t>(j)];
        }
      }
      for (int j = 0; j < k; ++j) {
        out[bspec.offset + static_cast<std::size_t>(j)] =
            dz[static_cast<std::size_t>(j)];
      }
    } else {
      const int h = spec_.hidden;
      auto w2 = params.layer_values(2);
      const LayerSpec& w1spec = layout_->layer(0);
      const LayerSpec& b1spec = layout_->layer(1);
      const LayerSpec& w2spec = layout_->layer(2);
      const LayerSpec& b2spec = layout_->layer(3);

      // Output layer.
      for (int r = 0; r < h; ++r) {
        const double hr = f.hidden[static_cast<std::size_t>(r)];
        for (int j = 0; j < k; ++j) {
          out[w2spec.offset + static_cast<std::size_t>(r * k + j)] =
              hr * dz[static_cast<std::size_t>(j)];
        }
      }
      for (int j = 0; j < k; ++j) {
        out[b2spec.offset + static_cast<std::size_t>(j)] =
            dz[static_cast<std::size_t>(j)];
      }

      // Backprop through tanh: da = (W2 dz) * (1 - h^2).
      std::vector<double> da(static_cast<std::size_t>(h), 0.0);
      for (int r = 0; r < h; ++r) {
        double acc = 0.0;
        for (int j = 0; j < k; ++j) {
          acc += w2[static_cast<std::size_t>(r * k + j)] *
                 dz[static_cast<std::size_t>(j)];
        }
        const double hr = f.hidden[static_cast<std::size_t>(r)];
        da[static_cast<std::size_t>(r)] = acc * (1.0 - hr * hr);
      }
      for (int i = 0; i < d; ++i) {
        const double xi = x[static_cast<std::size_t>(i)];
        for (int r = 0; r < h; ++r) {
          out[w1spec.offset + static_cast<std::size_t>(i * h + r)] =
              xi * da[static_cast<std::size_t>(r)];
        }
      }
      for (int r = 0; r < h; ++r) {
        out[b1spec.offset + static_cast<std::size_t>(r)] =
            da[static_cast<std::size_t>(r)];
      }
    }
  }
  return batch;
}

int Model::predict(const GradientVector& params,
                   std::span<const double> x) const {
  Forward f = forward_pass(spec_, params, x, -1);
  return static_cast<int>(std::max_element(f.probs.begin(), f.probs.end()) -
                          f.probs.begin());
}

double Model::accuracy(const GradientVector& params, const Dataset& data) const {
  if (data.size() == 0) throw InvalidParameter("accuracy: empty dataset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (predict(params, data.sample(i)) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace dpgrad
