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

#ifndef DPGRAD_GRADIENT_HPP_
#define DPGRAD_GRADIENT_HPP_

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dpgrad {

/// One named contiguous slice of the flat parameter vector.
struct LayerSpec {
  std::string name;
  std::size_t size = 0;    // coordinate count, >= 1
  std::size_t offset = 0;  // start index into flat storage

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Ordered, contiguous, non-overlapping layer map over a flat vector.
/// Equality is structural (names, sizes, offsets).
class Layout {
 public:
  /// Builds a layout from (name, size) pairs; offsets are assigned
  /// contiguously in order. Throws InvalidInput on empty/zero-size layers or
  /// duplicate names.
  static std::shared_ptr<const Layout> make(
      std::vector<std::pair<std::string, std::size_t>> layers);

  /// Single anonymous layer covering the whole vector.
  static std::shared_ptr<const Layout> flat(std::size_t size,
                                            std::string name = "all");

  const std::vector<LayerSpec>& layers() const { return layers_; }
  std::size_t layer_count() const { return layers_.size(); }
  std::size_t total_size() const { return total_; }
  const LayerSpec& layer(std::size_t i) const { return layers_.at(i); }

  friend bool operator==(const Layout& a, const Layout& b) {
    return a.layers_ == b.layers_;
  }

 private:
  Layout(std::vector<LayerSpec> layers, std::size_t total)
      : layers_(std::move(layers)), total_(total) {}

  std::vector<LayerSpec> layers_;
  std::size_t total_ = 0;
};

using LayoutPtr = std::shared_ptr<const Layout>;

/// True when the two layouts are the same object or structurally equal.
bool same_layout(const LayoutPtr& a, const LayoutPtr& b);

/// Flat real-valued gradient with a layer layout. Values are finite by
/// construction; operations on GradientVector are pure value transforms.
class GradientVector {
 public:
  GradientVector(LayoutPtr layout, std::vector<double> values);

  static GradientVector zeros(LayoutPtr layout);

  const Layout& layout() const { return *layout_; }
  const LayoutPtr& layout_ptr() const { return layout_; }
  std::size_t size() const { return values_.size(); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  std::span<const double> layer_values(std::size_t layer_index) const;
  std::span<double> layer_values(std::size_t layer_index);

  GradientVector& operator+=(const GradientVector& other);
  GradientVector& operator-=(const GradientVector& other);
  GradientVector& operator*=(double factor);

  friend GradientVector operator+(GradientVector a, const GradientVector& b) {
    a += b;
    return a;
  }
  friend GradientVector operator-(GradientVector a, const GradientVector& b) {
    a -= b;
    return a;
  }
  friend GradientVector operator*(GradientVector a, double factor) {
    a *= factor;
    return a;
  }
  friend GradientVector operator*(double factor, GradientVector a) {
    a *= factor;
    return a;
  }

 private:
  LayoutPtr layout_;
  std::vector<double> values_;
};

/// B per-sample gradients sharing one layout, stored row-major.
class SampleBatchGradients {
 public:
  SampleBatchGradients(LayoutPtr layout, std::size_t batch_size);

  /// Throws LayoutError unless every row shares one structural layout.
  static SampleBatchGradients from_rows(const std::vector<GradientVector>& rows);

  const Layout& layout() const { return *layout_; }
  const LayoutPtr& layout_ptr() const { return layout_; }
  std::size_t batch_size() const { return batch_; }
  std::size_t dim() const { return layout_->total_size(); }

  std::span<const double> row(std::size_t i) const;
  std::span<double> row(std::size_t i);
  GradientVector row_vector(std::size_t i) const;

 private:
  LayoutPtr layout_;
  std::size_t batch_ = 0;
  std::vector<double> data_;
};

/// Euclidean norm. Throws InvalidInput if any coordinate is non-finite.
double l2_norm(const GradientVector& v);

/// Squared Euclidean distance between two vectors of equal layout.
double squared_distance(const GradientVector& a, const GradientVector& b);

/// Projects v into the origin-centered ball of radius clip_radius: the
/// output norm is min(||v||, C) with direction preserved. Idempotent.
/// Throws InvalidParameter when clip_radius <= 0.
GradientVector sphere_project(const GradientVector& v, double clip_radius);

/// In-place variant used by hot loops.
void sphere_project_in_place(std::span<double> values, double clip_radius);

/// Coordinate-wise arithmetic mean of the batch rows.
GradientVector mean_gradient(const SampleBatchGradients& batch);

// Gradient dump fixture format: header "m B layer_count", layer_count lines
// "name size", then B rows of m decimal reals. Values round-trip bit-exactly
// at 17 significant digits.
void write_gradient_dump(std::ostream& out, const SampleBatchGradients& batch);
SampleBatchGradients read_gradient_dump(std::istream& in);

}  // namespace dpgrad

#endif  // DPGRAD_GRADIENT_HPP_
