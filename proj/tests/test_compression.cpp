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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dpgrad/compression.hpp"
#include "dpgrad/errors.hpp"
#include "dpgrad/tasks.hpp"
#include "helpers.hpp"

using namespace dpgrad;
using dpgrad::testing::batch_of;
using dpgrad::testing::rel_err;
using dpgrad::testing::vec;

namespace {

// Brute-force reference: sort by (|value| desc, index asc), keep k.
std::vector<std::uint32_t> brute_force_topk(std::span<const double> values,
                                            std::size_t k) {
  std::vector<std::uint32_t> order(values.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     return std::fabs(values[a]) > std::fabs(values[b]);
                   });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

double frobenius(std::span<const double> values) {
  double sum = 0.0;
  for (double x : values) sum += x * x;
  return std::sqrt(sum);
}

}  // namespace

TEST_CASE("top-k keeps {3,4} of [3,-1,4,1] at rate 2") {
  GradientVector v = vec({3.0, -1.0, 4.0, 1.0});
  SparsifyResult r = topk_sparsify(v, 2.0, PayloadBits::b64);
  REQUIRE(r.message.layers.size() == 1);
  CHECK(r.message.layers[0].indices == std::vector<std::uint32_t>{0, 2});
  CHECK(r.message.layers[0].values == std::vector<double>{3.0, 4.0});
  CHECK(r.residual.values()[0] == 0.0);
  CHECK(r.residual.values()[1] == -1.0);
  CHECK(r.residual.values()[2] == 0.0);
  CHECK(r.residual.values()[3] == 1.0);
}

TEST_CASE("rate 1 carries everything with a zero residual") {
  GradientVector v = vec({0.5, -2.0, 0.0, 1.25});
  SparsifyResult r = topk_sparsify(v, 1.0, PayloadBits::b64);
  CHECK(r.message.nnz() == 4);
  CHECK(l2_norm(r.residual) == 0.0);
  GradientVector back = decompress(r.message, v.layout_ptr());
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(back[i] == v[i]);
}

TEST_CASE("equal magnitudes break ties toward the lowest index") {
  GradientVector v = vec({2.0, -2.0, 2.0, 2.0, -2.0, 2.0, 2.0, 2.0});
  SparsifyResult r = topk_sparsify(v, 4.0, PayloadBits::b64);
  CHECK(r.message.layers[0].indices == std::vector<std::uint32_t>{0, 1});
}

TEST_CASE("rate below 1 is rejected") {
  GradientVector v = vec({1.0, 2.0});
  CHECK_THROWS_AS(topk_sparsify(v, 0.5), InvalidParameter);
}

TEST_CASE("every layer keeps at least one coordinate") {
  auto layout = Layout::make({{"tiny", 2}, {"big", 9}});
  GradientVector v(layout, {1.0, 2.0, 9, 8, 7, 6, 5, 4, 3, 2, 1});
  SparsifyResult r = topk_sparsify(v, 100.0, PayloadBits::b64);
  CHECK(r.message.layers[0].indices.size() == 1);  // max(1, floor(2/100))
  CHECK(r.message.layers[1].indices.size() == 1);
}

TEST_CASE("top-k optimality against the brute-force oracle") {
  RngStream rng(3, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 1 + rng.below(64);
    std::vector<double> values(m);
    for (double& x : values) x = rng.normal();
    // Occasionally force ties.
    if (trial % 3 == 0 && m > 2) values[m / 2] = values[0];
    const double rate = 1.0 + 7.0 * rng.uniform();
    const std::size_t k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(m / rate)));

    GradientVector v = vec(values);
    SparsifyResult r = topk_sparsify(v, rate, PayloadBits::b64);
    CHECK(r.message.layers[0].indices == brute_force_topk(values, k));

    // No dropped coordinate strictly exceeds any kept one.
    double min_kept = std::numeric_limits<double>::infinity();
    for (std::uint32_t idx : r.message.layers[0].indices) {
      min_kept = std::min(min_kept, std::fabs(values[idx]));
    }
    for (std::size_t i = 0; i < m; ++i) {
      if (r.residual[i] != 0.0) {
        CHECK(std::fabs(values[i]) <= min_kept);
      }
    }
  }
}

TEST_CASE("error feedback conservation: message + residual reconstructs input") {
  RngStream rng(4, 0);
  std::vector<double> values(40);
  for (double& x : values) x = rng.normal();
  GradientVector v = vec(values);

  SUBCASE("exact without truncation") {
    SparsifyResult r = topk_sparsify(v, 4.0, PayloadBits::b64);
    GradientVector sum = decompress(r.message, v.layout_ptr()) + r.residual;
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(sum[i] == v[i]);
  }
  SUBCASE("within the mantissa bound with 16-bit payloads") {
    SparsifyResult r = topk_sparsify(v, 4.0, PayloadBits::b16);
    GradientVector sum = decompress(r.message, v.layout_ptr()) + r.residual;
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(std::fabs(sum[i] - v[i]) <= std::ldexp(std::fabs(v[i]), -7));
    }
  }
}

TEST_CASE("truncate_bits preserves exact values and bounds the error") {
  CHECK(truncate_bits(0.0) == 0.0);
  CHECK(truncate_bits(1.5) == 1.5);
  CHECK(truncate_bits(-1.5) == -1.5);

  RngStream rng(5, 0);
  for (int i = 0; i < 2000; ++i) {
    const double x = std::ldexp(rng.normal(), static_cast<int>(rng.below(40)) - 20);
    const double t = truncate_bits(x);
    CHECK(std::fabs(t - x) <= std::ldexp(std::fabs(x), -7));
    CHECK(truncate_bits(t) == t);  // idempotent
    CHECK(std::fabs(t) <= std::fabs(x));  // toward zero
    CHECK(std::signbit(t) == std::signbit(x));
    const double t32 = truncate_bits(x, PayloadBits::b32);
    CHECK(std::fabs(t32 - x) <= std::ldexp(std::fabs(x), -23));
    CHECK(truncate_bits(x, PayloadBits::b64) == x);
  }
}

TEST_CASE("matricization shapes and round trip") {
  MatShape four = matricize_shape(4);
  CHECK(four.rows == 2);
  CHECK(four.cols == 2);
  MatShape five = matricize_shape(5);
  CHECK(five.rows == 3);
  CHECK(five.cols == 2);

  RngStream rng(6, 0);
  for (std::size_t m : {1u, 2u, 5u, 12u, 16u, 37u}) {
    std::vector<double> values(m);
    for (double& x : values) x = rng.normal();
    MatShape shape = matricize_shape(m);
    CHECK(shape.rows * shape.cols >= m);
    std::vector<double> mat = matricize(values, shape);
    std::vector<double> back = dematricize(mat, shape, m);
    CHECK(back == values);
    for (std::size_t i = m; i < mat.size(); ++i) CHECK(mat[i] == 0.0);
  }
}

TEST_CASE("rank-1 input reconstructs after two warm-started calls") {
  // M = p q^T over a single 16-coordinate layer (4x4 matricization).
  std::vector<double> p{1.0, -2.0, 0.5, 3.0};
  std::vector<double> q{2.0, 1.0, -1.0, 0.5};
  std::vector<double> values(16);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) values[i * 4 + j] = p[i] * q[j];
  }
  GradientVector v = vec(values);

  RngStream rng(7, 0);
  FactorizeResult first = powersgd_factorize(v, 1, nullptr, rng, 1);
  FactorizeResult second =
      powersgd_factorize(v, 1, &first.warm_start, rng, 1);
  GradientVector recon = decompress(second.message, v.layout_ptr());
  double err = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    err += (recon[i] - v[i]) * (recon[i] - v[i]);
  }
  CHECK(std::sqrt(err) <= 1e-8 * frobenius(values));
}

TEST_CASE("zero gradient compresses to a zero reconstruction and residual") {
  GradientVector v = vec(std::vector<double>(9, 0.0));
  RngStream rng(8, 0);
  FactorizeResult r = powersgd_factorize(v, 2, nullptr, rng, 1);
  CHECK(l2_norm(r.residual) == 0.0);
  GradientVector recon = decompress(r.message, v.layout_ptr());
  CHECK(l2_norm(recon) == 0.0);
  // The factors stay orthonormal even on degenerate input.
  const LowRankLayer& layer = r.message.layers[0];
  for (std::uint32_t a = 0; a < layer.rank; ++a) {
    for (std::uint32_t b = 0; b < layer.rank; ++b) {
      double dot = 0.0;
      for (std::uint32_t i = 0; i < layer.rows; ++i) {
        dot += layer.p[i * layer.rank + a] * layer.p[i * layer.rank + b];
      }
      CHECK(std::fabs(dot - (a == b ? 1.0 : 0.0)) <= 1e-6);
    }
  }
}

TEST_CASE("degenerate input keeps high-rank factors orthonormal") {
  GradientVector v = vec(std::vector<double>(100, 0.0));  // 10x10 matricization
  RngStream rng(16, 0);
  FactorizeResult r = powersgd_factorize(v, 8, nullptr, rng, 1);
  const LowRankLayer& layer = r.message.layers[0];
  REQUIRE(layer.rank == 8);
  for (std::uint32_t a = 0; a < layer.rank; ++a) {
    for (std::uint32_t b = 0; b < layer.rank; ++b) {
      double dot = 0.0;
      for (std::uint32_t i = 0; i < layer.rows; ++i) {
        dot += layer.p[i * layer.rank + a] * layer.p[i * layer.rank + b];
      }
      CHECK(std::fabs(dot - (a == b ? 1.0 : 0.0)) <= 1e-6);
    }
  }
  CHECK(l2_norm(decompress(r.message, v.layout_ptr())) == 0.0);
}

TEST_CASE("requested rank above min(n1,n2) is clamped and flagged") {
  GradientVector v = vec({1.0, 2.0, 3.0, 4.0, 5.0, 6.0});  // 3x2 matricization
  RngStream rng(9, 0);
  FactorizeResult r = powersgd_factorize(v, 5, nullptr, rng, 1);
  CHECK(r.message.rank_clamped);
  CHECK(r.message.layers[0].rank == 2);
}

TEST_CASE("P columns stay orthonormal after every compress call") {
  RngStream rng(10, 0);
  auto compressor = make_low_rank_compressor(2, 1);
  auto layout = Layout::make({{"a", 25}, {"b", 7}});
  for (int call = 0; call < 20; ++call) {
    std::vector<double> values(32);
    for (double& x : values) x = rng.normal();
    CompressOutcome out =
        compressor->compress(GradientVector(layout, values), rng);
    const auto& message = std::get<LowRankMessage>(out.message);
    for (const LowRankLayer& layer : message.layers) {
      for (std::uint32_t a = 0; a < layer.rank; ++a) {
        for (std::uint32_t b = 0; b < layer.rank; ++b) {
          double dot = 0.0;
          for (std::uint32_t i = 0; i < layer.rows; ++i) {
            dot += layer.p[i * layer.rank + a] * layer.p[i * layer.rank + b];
          }
          CHECK(std::fabs(dot - (a == b ? 1.0 : 0.0)) <= 1e-6);
        }
      }
    }
  }
}

TEST_CASE("powersgd_compress carries residual feedback in its state") {
  RngStream rng(11, 0);
  std::vector<double> values(16);
  for (double& x : values) x = rng.normal();
  GradientVector v = vec(values);
  CompressorState state(v.layout_ptr());
  LowRankCompressResult r = powersgd_compress(v, 1, state, rng);
  // State residual equals input - reconstruction.
  GradientVector recon = decompress(r.message, v.layout_ptr());
  for (std::size_t i = 0; i < v.size(); ++i) {
    CHECK(state.residual[i] == doctest::Approx(v[i] - recon[i]).epsilon(1e-12));
  }
  CHECK(state.warm_start.has_value());
}

TEST_CASE("decompress validates messages") {
  auto layout = Layout::flat(4);
  SparseMessage empty;
  empty.layers.push_back(SparseLayer{0, {}, {}});
  GradientVector zero = decompress(empty, layout);
  CHECK(l2_norm(zero) == 0.0);

  SparseMessage bad_index;
  bad_index.layers.push_back(SparseLayer{0, {9}, {1.0}});
  CHECK_THROWS_AS(decompress(bad_index, layout), CorruptMessage);

  SparseMessage bad_layer;
  bad_layer.layers.push_back(SparseLayer{3, {0}, {1.0}});
  CHECK_THROWS_AS(decompress(bad_layer, layout), CorruptMessage);

  SparseMessage unsorted;
  unsorted.layers.push_back(SparseLayer{0, {2, 1}, {1.0, 2.0}});
  CHECK_THROWS_AS(decompress(unsorted, layout), CorruptMessage);
}

TEST_CASE("coo byte accounting") {
  SparseMessage empty;
  empty.layers.push_back(SparseLayer{0, {}, {}});
  CHECK(coo_bytes(empty) == 8);

  SparseMessage ten;
  ten.payload_bits = PayloadBits::b16;
  SparseLayer layer{0, {}, {}};
  for (std::uint32_t i = 0; i < 10; ++i) {
    layer.indices.push_back(i);
    layer.values.push_back(1.0);
  }
  ten.layers.push_back(layer);
  CHECK(coo_bytes(ten) == 68);  // 10*(4+2) + 8

  LowRankMessage low;
  low.layers.push_back(LowRankLayer{0, 3, 2, 1,
                                    std::vector<double>(3, 0.0),
                                    std::vector<double>(2, 0.0)});
  CHECK(coo_bytes(low) == 28);  // (3+2)*1*4 + 8

  // Monotone in nnz.
  SparseMessage more = ten;
  more.layers[0].indices.push_back(10);
  more.layers[0].values.push_back(0.5);
  CHECK(coo_bytes(more) > coo_bytes(ten));
}

TEST_CASE("wire encoding matches coo_bytes and round-trips") {
  RngStream rng(12, 0);
  auto layout = Layout::make({{"a", 11}, {"b", 5}});
  std::vector<double> values(16);
  for (double& x : values) x = rng.normal();
  GradientVector v(layout, values);

  SUBCASE("sparse, 16-bit payload") {
    SparsifyResult r = topk_sparsify(v, 3.0, PayloadBits::b16);
    std::vector<std::uint8_t> bytes = encode_message(r.message);
    CHECK(bytes.size() == coo_bytes(r.message));
    SparseMessage back =
        decode_sparse_message(bytes, PayloadBits::b16, *layout);
    REQUIRE(back.layers.size() == r.message.layers.size());
    for (std::size_t li = 0; li < back.layers.size(); ++li) {
      CHECK(back.layers[li].indices == r.message.layers[li].indices);
      CHECK(back.layers[li].values == r.message.layers[li].values);
    }
  }
  SUBCASE("sparse, 64-bit payload is lossless") {
    SparsifyResult r = topk_sparsify(v, 1.0, PayloadBits::b64);
    std::vector<std::uint8_t> bytes = encode_message(r.message);
    CHECK(bytes.size() == coo_bytes(r.message));
    SparseMessage back =
        decode_sparse_message(bytes, PayloadBits::b64, *layout);
    GradientVector recon = decompress(back, layout);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(recon[i] == v[i]);
  }
  SUBCASE("low-rank factors at float32 width") {
    RngStream comp_rng(13, 0);
    FactorizeResult r = powersgd_factorize(v, 2, nullptr, comp_rng, 1);
    std::vector<std::uint8_t> bytes = encode_message(r.message);
    CHECK(bytes.size() == coo_bytes(r.message));
    LowRankMessage back = decode_low_rank_message(bytes, *layout);
    REQUIRE(back.layers.size() == r.message.layers.size());
    for (std::size_t li = 0; li < back.layers.size(); ++li) {
      REQUIRE(back.layers[li].p.size() == r.message.layers[li].p.size());
      for (std::size_t i = 0; i < back.layers[li].p.size(); ++i) {
        CHECK(back.layers[li].p[i] ==
              doctest::Approx(r.message.layers[li].p[i]).epsilon(1e-6));
      }
    }
    CHECK_THROWS_AS(
        decode_low_rank_message(
            std::span<const std::uint8_t>(bytes.data(), bytes.size() - 2),
            *layout),
        CorruptMessage);
  }
}

TEST_CASE("variance contraction is k/m under a stable kept set") {
  // g has exactly k spikes that dominate the per-coordinate noise while the
  // total noise norm still dominates ||g||; the kept set is then fixed, so
  // the retained variance is k per-coordinate variances out of m.
  const std::size_t m = 400;
  const double rate = 100.0;  // k = 4
  const std::size_t k = 4;
  const double s = 0.5;
  GradientVector g = make_spike_gradient(m, k, 6.0 * s);
  CHECK(l2_norm(g) < std::sqrt(static_cast<double>(m)) * s);

  RngStream base(14, 0);
  const int trials = 1000;
  std::vector<std::vector<double>> draws(trials);
  for (int t = 0; t < trials; ++t) {
    RngStream rng = base.fork(t);
    GradientVector v = g;
    for (double& x : v.values()) x += s * rng.normal();
    SparsifyResult r = topk_sparsify(v, rate, PayloadBits::b64);
    GradientVector d = decompress(r.message, g.layout_ptr());
    draws[t].assign(d.values().begin(), d.values().end());
  }
  std::vector<double> mean(m, 0.0);
  for (const auto& d : draws) {
    for (std::size_t j = 0; j < m; ++j) mean[j] += d[j];
  }
  for (double& x : mean) x /= trials;
  double total_variance = 0.0;
  for (const auto& d : draws) {
    for (std::size_t j = 0; j < m; ++j) {
      total_variance += (d[j] - mean[j]) * (d[j] - mean[j]);
    }
  }
  total_variance /= trials;
  const double per_coordinate = total_variance / static_cast<double>(m);
  const double expected = (static_cast<double>(k) / static_cast<double>(m)) *
                          s * s;
  CHECK(rel_err(per_coordinate, expected) < 0.15);
}

TEST_CASE("topk compressor clone is independent") {
  auto a = make_topk_compressor(2.0, PayloadBits::b64);
  auto b = a->clone();
  CHECK(a->kind() == "topk");
  RngStream rng(15, 0);
  GradientVector v = vec({1.0, -3.0, 2.0, 0.5});
  CompressOutcome out_a = a->compress(v, rng);
  CompressOutcome out_b = b->compress(v, rng);
  CHECK(std::get<SparseMessage>(out_a.message).layers[0].indices ==
        std::get<SparseMessage>(out_b.message).layers[0].indices);
}
