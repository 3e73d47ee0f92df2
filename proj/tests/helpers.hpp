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

#ifndef DPGRAD_TESTS_HELPERS_HPP_
#define DPGRAD_TESTS_HELPERS_HPP_

#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "dpgrad/gradient.hpp"

namespace dpgrad::testing {

inline GradientVector vec(std::vector<double> values) {
  LayoutPtr layout = Layout::flat(values.size());
  return GradientVector(std::move(layout), std::move(values));
}

inline SampleBatchGradients batch_of(std::vector<std::vector<double>> rows) {
  std::vector<GradientVector> grads;
  grads.reserve(rows.size());
  for (auto& row : rows) grads.push_back(vec(std::move(row)));
  return SampleBatchGradients::from_rows(grads);
}

/// Distance in representable doubles (0 when bit-equal). Mixed signs count
/// through zero.
inline std::uint64_t ulp_distance(double a, double b) {
  if (a == b) return 0;
  if (std::isnan(a) || std::isnan(b)) return UINT64_MAX;
  auto to_ordered = [](double x) {
    std::int64_t bits;
    std::memcpy(&bits, &x, 8);
    return bits < 0 ? std::int64_t(0x8000000000000000ULL) - bits : bits;
  };
  std::int64_t ia = to_ordered(a);
  std::int64_t ib = to_ordered(b);
  return static_cast<std::uint64_t>(ia > ib ? ia - ib : ib - ia);
}

inline double rel_err(double actual, double expected) {
  if (expected == 0.0) return std::fabs(actual);
  return std::fabs(actual - expected) / std::fabs(expected);
}

}  // namespace dpgrad::testing

#endif  // DPGRAD_TESTS_HELPERS_HPP_
