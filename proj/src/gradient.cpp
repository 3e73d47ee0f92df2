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

#include "dpgrad/gradient.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "dpgrad/errors.hpp"

namespace dpgrad {

std::shared_ptr<const Layout> Layout::make(
    std::vector<std::pair<std::string, std::size_t>> layers) {
  if (layers.empty()) {
    throw InvalidInput("Layout: at least one layer required");
  }
  std::vector<LayerSpec> specs;
  specs.reserve(layers.size());
  std::set<std::string> names;
  std::size_t offset = 0;
  for (auto& [name, size] : layers) {
    if (name.empty() ||
        std::any_of(name.begin(), name.end(),
                    [](unsigned char c) { return std::isspace(c); })) {
      throw InvalidInput("Layout: layer name must be a non-empty identifier");
    }
    if (size == 0) {
      throw InvalidInput("Layout: layer '" + name + "' has zero size");
    }
    if (!names.insert(name).second) {
      throw InvalidInput("Layout: duplicate layer name '" + name + "'");
    }
    specs.push_back(LayerSpec{std::move(name), size, offset});
    offset += size;
  }
  return std::shared_ptr<const Layout>(new Layout(std::move(specs), offset));
}

std::shared_ptr<const Layout> Layout::flat(std::size_t size, std::string name) {
  return make({{std::move(name), size}});
}

bool same_layout(const LayoutPtr& a, const LayoutPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return *a == *b;
}

GradientVector::GradientVector(LayoutPtr layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
  if (!layout_) throw InvalidInput("GradientVector: null layout");
  if (values_.size() != layout_->total_size()) {
    throw LayoutError("GradientVector: values length " +
                      std::to_string(values_.size()) +
                      " does not match layout total " +
                      std::to_string(layout_->total_size()));
  }
  for (double x : values_) {
    if (!std::isfinite(x)) {
      throw InvalidInput("GradientVector: non-finite coordinate");
    }
  }
}

GradientVector GradientVector::zeros(LayoutPtr layout) {
  if (!layout) throw InvalidInput("GradientVector: null layout");
  std::vector<double> v(layout->total_size(), 0.0);
  return GradientVector(std::move(layout), std::move(v));
}

std::span<const double> GradientVector::layer_values(
    std::size_t layer_index) const {
  const LayerSpec& spec = layout_->layer(layer_index);
  return std::span<const double>(values_).subspan(spec.offset, spec.size);
}

std::span<double> GradientVector::layer_values(std::size_t layer_index) {
  const LayerSpec& spec = layout_->layer(layer_index);
  return std::span<double>(values_).subspan(spec.offset, spec.size);
}

namespace {

void require_same_layout(const GradientVector& a, const GradientVector& b) {
  if (!same_layout(a.layout_ptr(), b.layout_ptr())) {
    throw LayoutError("gradient layouts differ");
  }
}

}  // namespace

GradientVector& GradientVector::operator+=(const GradientVector& other) {
  require_same_layout(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other[i];
  return *this;
}

GradientVector& GradientVector::operator-=(const GradientVector& other) {
  require_same_layout(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other[i];
  return *this;
}

GradientVector& GradientVector::operator*=(double factor) {
  for (double& x : values_) x *= factor;
  return *this;
}

SampleBatchGradients::SampleBatchGradients(LayoutPtr layout,
                                           std::size_t batch_size)
    : layout_(std::move(layout)), batch_(batch_size) {
  if (!layout_) throw InvalidInput("SampleBatchGradients: null layout");
  if (batch_ == 0) throw InvalidParameter("SampleBatchGradients: B >= 1 required");
  data_.assign(batch_ * layout_->total_size(), 0.0);
}

SampleBatchGradients SampleBatchGradients::from_rows(
    const std::vector<GradientVector>& rows) {
  if (rows.empty()) {
    throw InvalidParameter("SampleBatchGradients: B >= 1 required");
  }
  SampleBatchGradients batch(rows.front().layout_ptr(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!same_layout(rows[i].layout_ptr(), batch.layout_ptr())) {
      throw LayoutError("SampleBatchGradients: row " + std::to_string(i) +
                        " layout mismatch");
    }
    std::copy(rows[i].values().begin(), rows[i].values().end(),
              batch.row(i).begin());
  }
  return batch;
}

std::span<const double> SampleBatchGradients::row(std::size_t i) const {
  return std::span<const double>(data_).subspan(i * dim(), dim());
}

std::span<double> SampleBatchGradients::row(std::size_t i) {
  return std::span<double>(data_).subspan(i * dim(), dim());
}

GradientVector SampleBatchGradients::row_vector(std::size_t i) const {
  auto r = row(i);
  return GradientVector(layout_, std::vector<double>(r.begin(), r.end()));
}

double l2_norm(const GradientVector& v) {
  double sum = 0.0;
  for (double x : v.values()) {
    if (!std::isfinite(x)) throw InvalidInput("l2_norm: non-finite coordinate");
    sum += x * x;
  }
  return std::sqrt(sum);
}

double squared_distance(const GradientVector& a, const GradientVector& b) {
  require_same_layout(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

void sphere_project_in_place(std::span<double> values, double clip_radius) {
  if (!(clip_radius > 0.0)) {
    throw InvalidParameter("sphere_project: clip radius must be positive");
  }
  // Norms within 8 eps of the radius count as inside; rescaling until the
  // recomputed norm passes the same check makes projection exactly
  // idempotent while keeping ||out|| <= C (1 + 8 eps).
  const double bound =
      clip_radius * (1.0 + 8.0 * std::numeric_limits<double>::epsilon());
  for (int pass = 0; pass < 4; ++pass) {
    double sum = 0.0;
    for (double x : values) sum += x * x;
    const double norm = std::sqrt(sum);
    if (norm <= bound) return;
    const double scale = clip_radius / norm;
    for (double& x : values) x *= scale;
  }
}

GradientVector sphere_project(const GradientVector& v, double clip_radius) {
  GradientVector out = v;
  sphere_project_in_place(out.values(), clip_radius);
  return out;
}

GradientVector mean_gradient(const SampleBatchGradients& batch) {
  const std::size_t m = batch.dim();
  const std::size_t b = batch.batch_size();
  // Compensated coordinate-wise summation keeps the mean linear to a few
  // ulp regardless of the batch size.
  std::vector<double> sum(m, 0.0);
  std::vector<double> carry(m, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    auto r = batch.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      const double y = r[j] - carry[j];
      const double t = sum[j] + y;
      carry[j] = (t - sum[j]) - y;
      sum[j] = t;
    }
  }
  const double inv = 1.0 / static_cast<double>(b);
  for (double& x : sum) x *= inv;
  return GradientVector(batch.layout_ptr(), std::move(sum));
}

void write_gradient_dump(std::ostream& out, const SampleBatchGradients& batch) {
  out << batch.dim() << ' ' << batch.batch_size() << ' '
      << batch.layout().layer_count() << '\n';
  for (const LayerSpec& spec : batch.layout().layers()) {
    out << spec.name << ' ' << spec.size << '\n';
  }
  char buf[40];
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    auto r = batch.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", r[j]);
      if (j) out << ' ';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("gradient dump: write failed");
}

SampleBatchGradients read_gradient_dump(std::istream& in) {
  std::size_t m = 0, b = 0, layer_count = 0;
  if (!(in >> m >> b >> layer_count)) {
    throw IoError("gradient dump: bad header");
  }
  std::vector<std::pair<std::string, std::size_t>> layers;
  layers.reserve(layer_count);
  for (std::size_t i = 0; i < layer_count; ++i) {
    std::string name;
    std::size_t size = 0;
    if (!(in >> name >> size)) throw IoError("gradient dump: bad layer line");
    layers.emplace_back(std::move(name), size);
  }
  LayoutPtr layout = Layout::make(std::move(layers));
  if (layout->total_size() != m) {
    throw IoError("gradient dump: layer sizes do not sum to m");
  }
  SampleBatchGradients batch(layout, b);
  for (std::size_t i = 0; i < b; ++i) {
    auto r = batch.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      if (!(in >> r[j])) throw IoError("gradient dump: bad value row");
    }
  }
  return batch;
}

}  // namespace dpgrad
