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

#include <limits>
#include <sstream>

#include "dpgrad/errors.hpp"
#include "dpgrad/gradient.hpp"
#include "dpgrad/rng.hpp"
#include "helpers.hpp"

using namespace dpgrad;
using dpgrad::testing::batch_of;
using dpgrad::testing::ulp_distance;
using dpgrad::testing::vec;

TEST_CASE("layout offsets are contiguous and sizes validated") {
  auto layout = Layout::make({{"w", 6}, {"b", 2}});
  CHECK(layout->total_size() == 8);
  CHECK(layout->layer(0).offset == 0);
  CHECK(layout->layer(1).offset == 6);

  CHECK_THROWS_AS(Layout::make({}), InvalidInput);
  CHECK_THROWS_AS(Layout::make({{"w", 0}}), InvalidInput);
  CHECK_THROWS_AS(Layout::make({{"w", 2}, {"w", 3}}), InvalidInput);
  CHECK_THROWS_AS(Layout::make({{"bad name", 2}}), InvalidInput);
}

TEST_CASE("layout equality is structural") {
  auto a = Layout::make({{"w", 4}, {"b", 2}});
  auto b = Layout::make({{"w", 4}, {"b", 2}});
  auto c = Layout::make({{"w", 2}, {"b", 4}});
  CHECK(same_layout(a, b));
  CHECK(!same_layout(a, c));
}

TEST_CASE("gradient vector validates length and finiteness") {
  auto layout = Layout::flat(3);
  CHECK_THROWS_AS(GradientVector(layout, {1.0, 2.0}), LayoutError);
  CHECK_THROWS_AS(
      GradientVector(layout, {1.0, std::numeric_limits<double>::quiet_NaN(), 0.0}),
      InvalidInput);
  CHECK_THROWS_AS(
      GradientVector(layout, {1.0, std::numeric_limits<double>::infinity(), 0.0}),
      InvalidInput);
}

TEST_CASE("l2_norm on the 3-4-5 triangle, zeros and ones") {
  CHECK(l2_norm(vec({3.0, 4.0})) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(l2_norm(vec(std::vector<double>(10, 0.0))) == 0.0);
  CHECK(l2_norm(vec({1.0, 1.0, 1.0, 1.0})) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("sphere projection scales only outside the ball") {
  GradientVector v = vec({6.0, 8.0});  // norm 10
  GradientVector projected = sphere_project(v, 5.0);
  CHECK(projected[0] == doctest::Approx(3.0));
  CHECK(projected[1] == doctest::Approx(4.0));
  CHECK(l2_norm(projected) == doctest::Approx(5.0));

  GradientVector inside = vec({3.0, 0.0});
  GradientVector same = sphere_project(inside, 5.0);
  CHECK(same[0] == 3.0);
  CHECK(same[1] == 0.0);

  GradientVector zero = vec({0.0, 0.0});
  GradientVector still_zero = sphere_project(zero, 2.5);
  CHECK(l2_norm(still_zero) == 0.0);

  CHECK_THROWS_AS(sphere_project(v, 0.0), InvalidParameter);
  CHECK_THROWS_AS(sphere_project(v, -1.0), InvalidParameter);
}

TEST_CASE("sphere projection is idempotent and norm-bounded") {
  RngStream rng(11, 0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> values(17);
    for (double& x : values) x = 10.0 * rng.normal();
    const double radius = 0.1 + 5.0 * rng.uniform();
    GradientVector v = vec(values);
    GradientVector once = sphere_project(v, radius);
    GradientVector twice = sphere_project(once, radius);
    for (std::size_t i = 0; i < once.size(); ++i) {
      CHECK(once[i] == twice[i]);  // exact
    }
    const double eps = std::numeric_limits<double>::epsilon();
    CHECK(l2_norm(once) <= radius + 8.0 * eps * radius);
  }
}

TEST_CASE("mean gradient examples") {
  SampleBatchGradients two = batch_of({{1.0, 2.0}, {3.0, 4.0}});
  GradientVector mean = mean_gradient(two);
  CHECK(mean[0] == 2.0);
  CHECK(mean[1] == 3.0);

  SampleBatchGradients single = batch_of({{7.0, -2.0, 0.5}});
  GradientVector same = mean_gradient(single);
  CHECK(same[0] == 7.0);
  CHECK(same[1] == -2.0);
  CHECK(same[2] == 0.5);

  SampleBatchGradients constant =
      batch_of({{1.5, -0.25}, {1.5, -0.25}, {1.5, -0.25}, {1.5, -0.25}});
  GradientVector c = mean_gradient(constant);
  CHECK(c[0] == 1.5);
  CHECK(c[1] == -0.25);
}

TEST_CASE("mean gradient rejects mismatched layouts") {
  std::vector<GradientVector> rows;
  rows.push_back(GradientVector(Layout::make({{"a", 2}}), {1.0, 2.0}));
  rows.push_back(GradientVector(Layout::make({{"b", 2}}), {3.0, 4.0}));
  CHECK_THROWS_AS(SampleBatchGradients::from_rows(rows), LayoutError);
}

TEST_CASE("mean gradient is linear to 4 ulp per coordinate") {
  RngStream rng(23, 0);
  for (int trial = 0; trial < 50; ++trial) {
    // Same-sign columns keep the mean well conditioned; the bound cannot
    // survive catastrophic cancellation under any summation order.
    std::vector<std::vector<double>> rows(5, std::vector<double>(13));
    std::vector<double> column_sign(13);
    for (double& s : column_sign) s = rng.uniform() < 0.5 ? -1.0 : 1.0;
    for (auto& row : rows) {
      for (std::size_t j = 0; j < row.size(); ++j) {
        row[j] = column_sign[j] * (0.5 + rng.uniform());
      }
    }
    const double a = 4.0 * rng.normal();
    std::vector<std::vector<double>> scaled = rows;
    for (auto& row : scaled) {
      for (double& x : row) x *= a;
    }
    GradientVector mean_scaled = mean_gradient(batch_of(scaled));
    GradientVector scaled_mean = mean_gradient(batch_of(rows)) * a;
    for (std::size_t i = 0; i < mean_scaled.size(); ++i) {
      CHECK(ulp_distance(mean_scaled[i], scaled_mean[i]) <= 4);
    }
  }
}

TEST_CASE("gradient dump round-trips bit-exactly") {
  RngStream rng(5, 9);
  std::vector<GradientVector> rows;
  auto layout = Layout::make({{"weights", 5}, {"bias", 2}});
  for (int i = 0; i < 4; ++i) {
    std::vector<double> values(7);
    for (double& x : values) x = std::exp(8.0 * (rng.uniform() - 0.5)) * rng.normal();
    rows.push_back(GradientVector(layout, values));
  }
  SampleBatchGradients batch = SampleBatchGradients::from_rows(rows);

  std::stringstream io;
  write_gradient_dump(io, batch);
  SampleBatchGradients back = read_gradient_dump(io);

  REQUIRE(back.batch_size() == batch.batch_size());
  REQUIRE(same_layout(back.layout_ptr(), batch.layout_ptr()));
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    auto expected = batch.row(i);
    auto actual = back.row(i);
    for (std::size_t j = 0; j < expected.size(); ++j) {
      CHECK(actual[j] == expected[j]);  // bit-exact at 17 significant digits
    }
  }
}

TEST_CASE("gradient dump header carries layer structure") {
  SampleBatchGradients batch = batch_of({{1.0, 2.0, 3.0}});
  std::stringstream io;
  write_gradient_dump(io, batch);
  std::string header;
  std::getline(io, header);
  CHECK(header == "3 1 1");
}

TEST_CASE("rng streams with equal identity are bit-identical over 1e6 draws") {
  RngStream a(0xdeadbeef, 17);
  RngStream b(0xdeadbeef, 17);
  for (int i = 0; i < 1000000; ++i) {
    REQUIRE(a.next_u64() == b.next_u64());
  }
}

TEST_CASE("rng streams differ across stream ids and seeds") {
  RngStream a(1, 1);
  RngStream b(1, 2);
  RngStream c(2, 1);
  int equal_ab = 0, equal_ac = 0;
  for (int i = 0; i < 64; ++i) {
    std::uint64_t x = a.next_u64();
    if (x == b.next_u64()) ++equal_ab;
    if (x == c.next_u64()) ++equal_ac;
  }
  CHECK(equal_ab == 0);
  CHECK(equal_ac == 0);
}

TEST_CASE("rng fork is pure and order-independent") {
  RngStream base(99, 3);
  RngStream child_a = base.fork(4);
  base.next_u64();  // advancing the parent must not change forks
  RngStream child_b = base.fork(4);
  for (int i = 0; i < 100; ++i) {
    REQUIRE(child_a.next_u64() == child_b.next_u64());
  }
}

TEST_CASE("labeled streams hash their purpose") {
  RngStream a = RngStream::labeled(7, "trial");
  RngStream b(7, fnv1a64("trial"));
  CHECK(a.next_u64() == b.next_u64());
}
