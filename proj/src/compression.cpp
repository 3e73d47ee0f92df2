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

#include "dpgrad/compression.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "dpgrad/errors.hpp"

namespace dpgrad {
namespace {

int mantissa_bits(PayloadBits bits) {
  switch (bits) {
    case PayloadBits::b16:
      return 7;
    case PayloadBits::b32:
      return 23;
    case PayloadBits::b64:
      return 52;
  }
  throw InvalidParameter("unknown payload width");
}

// Small row-major matrix view over a flat buffer.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

// P (n x r) = M (n x m) * Q (m x r), all row-major.
Mat mat_mul(const Mat& m, const Mat& q) {
  Mat out{m.rows, q.cols, std::vector<double>(m.rows * q.cols, 0.0)};
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t k = 0; k < m.cols; ++k) {
      const double mik = m.at(i, k);
      if (mik == 0.0) continue;
      for (std::size_t j = 0; j < q.cols; ++j) {
        out.at(i, j) += mik * q.at(k, j);
      }
    }
  }
  return out;
}

// Q (m x r) = M^T (m x n) * P (n x r).
Mat mat_tmul(const Mat& m, const Mat& p) {
  Mat out{m.cols, p.cols, std::vector<double>(m.cols * p.cols, 0.0)};
  for (std::size_t k = 0; k < m.rows; ++k) {
    for (std::size_t i = 0; i < m.cols; ++i) {
      const double mki = m.at(k, i);
      if (mki == 0.0) continue;
      for (std::size_t j = 0; j < p.cols; ++j) {
        out.at(i, j) += mki * p.at(k, j);
      }
    }
  }
  return out;
}

// Modified Gram-Schmidt on the columns of p. Columns that vanish after
// projection are replaced by canonical basis vectors re-orthogonalized
// against the earlier columns, keeping P^T P = I even on degenerate input.
void orthonormalize_columns(Mat& p) {
  const std::size_t n = p.rows;
  const std::size_t r = p.cols;
  for (std::size_t j = 0; j < r; ++j) {
    for (std::size_t prev = 0; prev < j; ++prev) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += p.at(i, prev) * p.at(i, j);
      for (std::size_t i = 0; i < n; ++i) p.at(i, j) -= dot * p.at(i, prev);
    }
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm_sq += p.at(i, j) * p.at(i, j);
    double norm = std::sqrt(norm_sq);
    if (norm > 1e-12) {
      for (std::size_t i = 0; i < n; ++i) p.at(i, j) /= norm;
      continue;
    }
    // Degenerate column: substitute the canonical basis vector with the
    // largest residual outside the span of the earlier columns. The span
    // has dimension j < n, so the best residual norm is at least
    // sqrt((n - j) / n) > 0.
    double best_norm_sq = -1.0;
    std::vector<double> candidate(n);
    std::vector<double> best(n);
    for (std::size_t basis = 0; basis < n; ++basis) {
      for (std::size_t i = 0; i < n; ++i) candidate[i] = (i == basis) ? 1.0 : 0.0;
      for (std::size_t prev = 0; prev < j; ++prev) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += p.at(i, prev) * candidate[i];
        for (std::size_t i = 0; i < n; ++i) candidate[i] -= dot * p.at(i, prev);
      }
      norm_sq = 0.0;
      for (double x : candidate) norm_sq += x * x;
      if (norm_sq > best_norm_sq) {
        best_norm_sq = norm_sq;
        best = candidate;
      }
    }
    norm = std::sqrt(best_norm_sq);
    for (std::size_t i = 0; i < n; ++i) p.at(i, j) = best[i] / norm;
  }
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

std::uint32_t read_u32(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (pos + 4 > bytes.size()) throw CorruptMessage("wire: truncated u32");
  std::uint32_t v = static_cast<std::uint32_t>(bytes[pos]) |
                    (static_cast<std::uint32_t>(bytes[pos + 1]) << 8) |
                    (static_cast<std::uint32_t>(bytes[pos + 2]) << 16) |
                    (static_cast<std::uint32_t>(bytes[pos + 3]) << 24);
  pos += 4;
  return v;
}

void append_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  append_u32(out, bits);
}

float read_f32(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  std::uint32_t bits = read_u32(bytes, pos);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

void append_value(std::vector<std::uint8_t>& out, double v, PayloadBits bits) {
  switch (bits) {
    case PayloadBits::b16: {
      // Values are pre-truncated to 7 mantissa bits, so the top half of the
      // float32 pattern carries them exactly.
      float f = static_cast<float>(v);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      std::uint16_t half = static_cast<std::uint16_t>(u >> 16);
      out.push_back(static_cast<std::uint8_t>(half));
      out.push_back(static_cast<std::uint8_t>(half >> 8));
      return;
    }
    case PayloadBits::b32:
      append_f32(out, static_cast<float>(v));
      return;
    case PayloadBits::b64: {
      std::uint64_t u;
      std::memcpy(&u, &v, 8);
      for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
      }
      return;
    }
  }
}

double read_value(std::span<const std::uint8_t> bytes, std::size_t& pos,
                  PayloadBits bits) {
  switch (bits) {
    case PayloadBits::b16: {
      if (pos + 2 > bytes.size()) throw CorruptMessage("wire: truncated value");
      std::uint16_t half = static_cast<std::uint16_t>(bytes[pos]) |
                           (static_cast<std::uint16_t>(bytes[pos + 1]) << 8);
      pos += 2;
      std::uint32_t u = static_cast<std::uint32_t>(half) << 16;
      float f;
      std::memcpy(&f, &u, 4);
      return static_cast<double>(f);
    }
    case PayloadBits::b32:
      return static_cast<double>(read_f32(bytes, pos));
    case PayloadBits::b64: {
      if (pos + 8 > bytes.size()) throw CorruptMessage("wire: truncated value");
      std::uint64_t u = 0;
      for (int i = 0; i < 8; ++i) {
        u |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
      }
      pos += 8;
      double v;
      std::memcpy(&v, &u, 8);
      return v;
    }
  }
  throw CorruptMessage("wire: unknown payload width");
}

class TopKCompressor final : public Compressor {
 public:
  TopKCompressor(double rate, PayloadBits bits) : rate_(rate), bits_(bits) {
    if (!(rate >= 1.0)) {
      throw InvalidParameter("top-k: rate must be >= 1");
    }
  }

  CompressOutcome compress(const GradientVector& v, RngStream&) override {
    SparsifyResult r = topk_sparsify(v, rate_, bits_);
    return CompressOutcome{MessagePayload(std::move(r.message)),
                           std::move(r.residual), false};
  }

  std::unique_ptr<Compressor> clone() const override {
    return std::make_unique<TopKCompressor>(*this);
  }

  std::string_view kind() const override { return "topk"; }

 private:
  double rate_;
  PayloadBits bits_;
};

class LowRankCompressor final : public Compressor {
 public:
  LowRankCompressor(std::uint32_t rank, int iterations)
      : rank_(rank), iterations_(iterations) {
    if (rank == 0) throw InvalidParameter("low-rank: rank must be >= 1");
    if (iterations < 1) {
      throw InvalidParameter("low-rank: iteration count must be >= 1");
    }
  }

  CompressOutcome compress(const GradientVector& v, RngStream& rng) override {
    FactorizeResult r = powersgd_factorize(
        v, rank_, warm_.has_value() ? &*warm_ : nullptr, rng, iterations_);
    warm_ = std::move(r.warm_start);
    const bool clamped = r.message.rank_clamped;
    return CompressOutcome{MessagePayload(std::move(r.message)),
                           std::move(r.residual), clamped};
  }

  std::unique_ptr<Compressor> clone() const override {
    return std::make_unique<LowRankCompressor>(*this);
  }

  std::string_view kind() const override { return "low-rank"; }

 private:
  std::uint32_t rank_;
  int iterations_;
  std::optional<LowRankWarmStart> warm_;
};

}  // namespace

PayloadBits payload_bits_from_int(int bits) {
  switch (bits) {
    case 16:
      return PayloadBits::b16;
    case 32:
      return PayloadBits::b32;
    case 64:
      return PayloadBits::b64;
    default:
      throw InvalidParameter("payload width must be 16, 32 or 64 bits");
  }
}

double truncate_bits(double x, PayloadBits bits) {
  if (!std::isfinite(x)) throw InvalidInput("truncate_bits: non-finite value");
  if (x == 0.0 || bits == PayloadBits::b64) return x;
  const int mbits = mantissa_bits(bits);
  int exponent = 0;
  double frac = std::frexp(std::fabs(x), &exponent);  // frac in [0.5, 1)
  double scaled = std::ldexp(frac, mbits + 1);        // [2^mbits, 2^(mbits+1))
  double kept = std::floor(scaled);
  return std::copysign(std::ldexp(kept, exponent - mbits - 1), x);
}

std::size_t SparseMessage::nnz() const {
  std::size_t total = 0;
  for (const SparseLayer& layer : layers) total += layer.indices.size();
  return total;
}

SparsifyResult topk_sparsify(const GradientVector& v, double rate,
                             PayloadBits payload_bits) {
  if (!(rate >= 1.0)) throw InvalidParameter("topk_sparsify: rate must be >= 1");
  SparseMessage message;
  message.payload_bits = payload_bits;
  GradientVector residual = v;
  const Layout& layout = v.layout();
  for (std::size_t li = 0; li < layout.layer_count(); ++li) {
    const LayerSpec& spec = layout.layer(li);
    auto layer = v.layer_values(li);
    const std::size_t k = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::floor(static_cast<double>(spec.size) / rate)));

    std::vector<std::uint32_t> order(spec.size);
    std::iota(order.begin(), order.end(), 0u);
    // Largest magnitude first; ties broken toward the lowest index.
    std::sort(order.begin(), order.end(),
              [&layer](std::uint32_t a, std::uint32_t b) {
                double fa = std::fabs(layer[a]);
                double fb = std::fabs(layer[b]);
                if (fa != fb) return fa > fb;
                return a < b;
              });
    order.resize(std::min(k, order.size()));
    std::sort(order.begin(), order.end());

    SparseLayer out;
    out.layer = static_cast<std::uint32_t>(li);
    out.indices = std::move(order);
    out.values.reserve(out.indices.size());
    auto res_layer = residual.layer_values(li);
    for (std::uint32_t idx : out.indices) {
      out.values.push_back(truncate_bits(layer[idx], payload_bits));
      res_layer[idx] = 0.0;  // residual tracks only the dropped coordinates
    }
    message.layers.push_back(std::move(out));
  }
  return SparsifyResult{std::move(message), std::move(residual)};
}

MatShape matricize_shape(std::size_t layer_size) {
  if (layer_size == 0) throw InvalidParameter("matricize: empty layer");
  std::size_t rows = static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(layer_size))));
  while (rows * rows < layer_size) ++rows;  // guard against sqrt rounding
  std::size_t cols = (layer_size + rows - 1) / rows;
  return MatShape{rows, cols};
}

std::vector<double> matricize(std::span<const double> layer_values,
                              MatShape shape) {
  std::vector<double> out(shape.rows * shape.cols, 0.0);
  std::copy(layer_values.begin(), layer_values.end(), out.begin());
  return out;
}

std::vector<double> dematricize(std::span<const double> matrix, MatShape shape,
                                std::size_t layer_size) {
  if (matrix.size() != shape.rows * shape.cols || layer_size > matrix.size()) {
    throw InvalidInput("dematricize: shape mismatch");
  }
  return std::vector<double>(matrix.begin(), matrix.begin() + layer_size);
}

FactorizeResult powersgd_factorize(const GradientVector& v, std::uint32_t rank,
                                   const LowRankWarmStart* warm_start,
                                   RngStream& rng, int iterations) {
  if (rank == 0) throw InvalidParameter("powersgd: rank must be >= 1");
  if (iterations < 1) throw InvalidParameter("powersgd: iterations must be >= 1");
  const Layout& layout = v.layout();
  if (warm_start && warm_start->q_per_layer.size() != layout.layer_count()) {
    throw LayoutError("powersgd: warm start layer count mismatch");
  }

  LowRankMessage message;
  LowRankWarmStart next_warm;
  next_warm.q_per_layer.resize(layout.layer_count());
  GradientVector residual = v;

  for (std::size_t li = 0; li < layout.layer_count(); ++li) {
    const LayerSpec& spec = layout.layer(li);
    const MatShape shape = matricize_shape(spec.size);
    const std::uint32_t max_rank =
        static_cast<std::uint32_t>(std::min(shape.rows, shape.cols));
    std::uint32_t r = rank;
    if (r > max_rank) {
      r = max_rank;
      message.rank_clamped = true;
    }

    Mat m{shape.rows, shape.cols, matricize(v.layer_values(li), shape)};

    Mat q{shape.cols, r, {}};
    const std::vector<double>* warm_q =
        warm_start ? &warm_start->q_per_layer[li] : nullptr;
    if (warm_q && warm_q->size() == shape.cols * r) {
      q.data = *warm_q;
    } else {
      q.data.resize(shape.cols * r);
      for (double& x : q.data) x = rng.normal();
    }

    Mat p{0, 0, {}};
    for (int iter = 0; iter < iterations; ++iter) {
      p = mat_mul(m, q);
      orthonormalize_columns(p);
      q = mat_tmul(m, p);
    }

    // Reconstruction P Q^T, written into the residual as v - reconstruction.
    auto res_layer = residual.layer_values(li);
    std::vector<double> recon(shape.rows * shape.cols, 0.0);
    for (std::size_t i = 0; i < shape.rows; ++i) {
      for (std::size_t jr = 0; jr < r; ++jr) {
        const double pij = p.at(i, jr);
        if (pij == 0.0) continue;
        for (std::size_t j = 0; j < shape.cols; ++j) {
          recon[i * shape.cols + j] += pij * q.at(j, jr);
        }
      }
    }
    for (std::size_t idx = 0; idx < spec.size; ++idx) {
      res_layer[idx] -= recon[idx];
    }

    LowRankLayer out;
    out.layer = static_cast<std::uint32_t>(li);
    out.rows = static_cast<std::uint32_t>(shape.rows);
    out.cols = static_cast<std::uint32_t>(shape.cols);
    out.rank = r;
    out.p = std::move(p.data);
    out.q = q.data;
    next_warm.q_per_layer[li] = std::move(q.data);
    message.layers.push_back(std::move(out));
  }
  return FactorizeResult{std::move(message), std::move(residual),
                         std::move(next_warm)};
}

LowRankCompressResult powersgd_compress(const GradientVector& v,
                                        std::uint32_t rank,
                                        CompressorState& state, RngStream& rng,
                                        int iterations) {
  if (!same_layout(v.layout_ptr(), state.residual.layout_ptr())) {
    throw LayoutError("powersgd_compress: state layout mismatch");
  }
  GradientVector input = v + state.residual;
  FactorizeResult r = powersgd_factorize(
      input, rank, state.warm_start ? &*state.warm_start : nullptr, rng,
      iterations);
  state.residual = r.residual;
  state.warm_start = std::move(r.warm_start);
  return LowRankCompressResult{std::move(r.message), std::move(r.residual)};
}

GradientVector decompress(const SparseMessage& message, const LayoutPtr& layout) {
  GradientVector out = GradientVector::zeros(layout);
  for (const SparseLayer& layer : message.layers) {
    if (layer.layer >= layout->layer_count()) {
      throw CorruptMessage("sparse message: layer id out of range");
    }
    if (layer.indices.size() != layer.values.size()) {
      throw CorruptMessage("sparse message: index/value count mismatch");
    }
    const LayerSpec& spec = layout->layer(layer.layer);
    auto dst = out.layer_values(layer.layer);
    std::uint32_t prev = 0;
    bool first = true;
    for (std::size_t i = 0; i < layer.indices.size(); ++i) {
      std::uint32_t idx = layer.indices[i];
      if (idx >= spec.size) {
        throw CorruptMessage("sparse message: index out of range");
      }
      if (!first && idx <= prev) {
        throw CorruptMessage("sparse message: indices not strictly increasing");
      }
      prev = idx;
      first = false;
      dst[idx] = layer.values[i];
    }
  }
  return out;
}

GradientVector decompress(const LowRankMessage& message, const LayoutPtr& layout) {
  GradientVector out = GradientVector::zeros(layout);
  for (const LowRankLayer& layer : message.layers) {
    if (layer.layer >= layout->layer_count()) {
      throw CorruptMessage("low-rank message: layer id out of range");
    }
    const LayerSpec& spec = layout->layer(layer.layer);
    const MatShape shape = matricize_shape(spec.size);
    if (layer.rows != shape.rows || layer.cols != shape.cols) {
      throw CorruptMessage("low-rank message: shape mismatch with layout");
    }
    if (layer.rank == 0 ||
        layer.p.size() != static_cast<std::size_t>(layer.rows) * layer.rank ||
        layer.q.size() != static_cast<std::size_t>(layer.cols) * layer.rank) {
      throw CorruptMessage("low-rank message: factor size mismatch");
    }
    auto dst = out.layer_values(layer.layer);
    for (std::size_t i = 0; i < layer.rows; ++i) {
      for (std::size_t j = 0; j < layer.cols; ++j) {
        const std::size_t flat = i * layer.cols + j;
        if (flat >= spec.size) continue;  // strip zero padding
        double acc = 0.0;
        for (std::size_t rr = 0; rr < layer.rank; ++rr) {
          acc += layer.p[i * layer.rank + rr] * layer.q[j * layer.rank + rr];
        }
        dst[flat] = acc;
      }
    }
  }
  return out;
}

GradientVector decompress(const MessagePayload& message, const LayoutPtr& layout) {
  return std::visit(
      [&layout](const auto& msg) { return decompress(msg, layout); }, message);
}

std::uint64_t coo_bytes(const SparseMessage& message) {
  const std::uint64_t payload = payload_byte_width(message.payload_bits);
  std::uint64_t total = 0;
  for (const SparseLayer& layer : message.layers) {
    total += 8 + layer.indices.size() * (4 + payload);
  }
  return total;
}

std::uint64_t coo_bytes(const LowRankMessage& message) {
  std::uint64_t total = 0;
  for (const LowRankLayer& layer : message.layers) {
    total += 8 + static_cast<std::uint64_t>(layer.rows + layer.cols) *
                     layer.rank * 4;
  }
  return total;
}

std::uint64_t coo_bytes(const MessagePayload& message) {
  return std::visit([](const auto& msg) { return coo_bytes(msg); }, message);
}

std::uint64_t dense_coo_bytes(const Layout& layout, PayloadBits payload_bits) {
  const std::uint64_t payload = payload_byte_width(payload_bits);
  std::uint64_t total = 0;
  for (const LayerSpec& spec : layout.layers()) {
    total += 8 + spec.size * (4 + payload);
  }
  return total;
}

std::vector<std::uint8_t> encode_message(const SparseMessage& message) {
  std::vector<std::uint8_t> out;
  out.reserve(coo_bytes(message));
  for (const SparseLayer& layer : message.layers) {
    append_u32(out, layer.layer);
    append_u32(out, static_cast<std::uint32_t>(layer.indices.size()));
    for (std::size_t i = 0; i < layer.indices.size(); ++i) {
      append_u32(out, layer.indices[i]);
      append_value(out, layer.values[i], message.payload_bits);
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_message(const LowRankMessage& message) {
  std::vector<std::uint8_t> out;
  out.reserve(coo_bytes(message));
  for (const LowRankLayer& layer : message.layers) {
    append_u32(out, layer.layer);
    append_u32(out, layer.rank);
    for (double x : layer.p) append_f32(out, static_cast<float>(x));
    for (double x : layer.q) append_f32(out, static_cast<float>(x));
  }
  return out;
}

SparseMessage decode_sparse_message(std::span<const std::uint8_t> bytes,
                                    PayloadBits payload_bits,
                                    const Layout& layout) {
  SparseMessage message;
  message.payload_bits = payload_bits;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    SparseLayer layer;
    layer.layer = read_u32(bytes, pos);
    std::uint32_t nnz = read_u32(bytes, pos);
    if (layer.layer >= layout.layer_count()) {
      throw CorruptMessage("wire: layer id out of range");
    }
    if (nnz > layout.layer(layer.layer).size) {
      throw CorruptMessage("wire: nnz exceeds layer size");
    }
    layer.indices.reserve(nnz);
    layer.values.reserve(nnz);
    for (std::uint32_t i = 0; i < nnz; ++i) {
      layer.indices.push_back(read_u32(bytes, pos));
      layer.values.push_back(read_value(bytes, pos, payload_bits));
    }
    message.layers.push_back(std::move(layer));
  }
  return message;
}

LowRankMessage decode_low_rank_message(std::span<const std::uint8_t> bytes,
                                       const Layout& layout) {
  LowRankMessage message;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    LowRankLayer layer;
    layer.layer = read_u32(bytes, pos);
    layer.rank = read_u32(bytes, pos);
    if (layer.layer >= layout.layer_count()) {
      throw CorruptMessage("wire: layer id out of range");
    }
    if (layer.rank == 0) throw CorruptMessage("wire: zero rank");
    const MatShape shape = matricize_shape(layout.layer(layer.layer).size);
    if (layer.rank > std::min(shape.rows, shape.cols)) {
      throw CorruptMessage("wire: rank exceeds the matricization");
    }
    layer.rows = static_cast<std::uint32_t>(shape.rows);
    layer.cols = static_cast<std::uint32_t>(shape.cols);
    layer.p.reserve(shape.rows * layer.rank);
    layer.q.reserve(shape.cols * layer.rank);
    for (std::size_t i = 0; i < shape.rows * layer.rank; ++i) {
      layer.p.push_back(static_cast<double>(read_f32(bytes, pos)));
    }
    for (std::size_t i = 0; i < shape.cols * layer.rank; ++i) {
      layer.q.push_back(static_cast<double>(read_f32(bytes, pos)));
    }
    message.layers.push_back(std::move(layer));
  }
  return message;
}

std::unique_ptr<Compressor> make_topk_compressor(double rate,
                                                 PayloadBits payload_bits) {
  return std::make_unique<TopKCompressor>(rate, payload_bits);
}

std::unique_ptr<Compressor> make_low_rank_compressor(std::uint32_t rank,
                                                     int iterations) {
  return std::make_unique<LowRankCompressor>(rank, iterations);
}

}  // namespace dpgrad
