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

#ifndef DPGRAD_COMPRESSION_HPP_
#define DPGRAD_COMPRESSION_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "dpgrad/gradient.hpp"
#include "dpgrad/rng.hpp"

namespace dpgrad {

/// Transmitted value width for sparse payloads. 16 keeps sign + 8 exponent
/// bits + 7 mantissa bits, 32 keeps a float32-width mantissa, 64 disables
/// truncation.
enum class PayloadBits : int { b16 = 16, b32 = 32, b64 = 64 };

PayloadBits payload_bits_from_int(int bits);
inline int payload_byte_width(PayloadBits bits) {
  return static_cast<int>(bits) / 8;
}

/// Truncates the mantissa of x toward zero so that only the payload's
/// mantissa bits survive; sign and exponent are preserved. Idempotent, and
/// |truncate(x) - x| <= 2^-7 |x| at the default 16-bit payload.
double truncate_bits(double x, PayloadBits bits = PayloadBits::b16);

/// Layer-wise top-k payload: indices sorted and unique per layer, values
/// already truncated to payload_bits.
struct SparseLayer {
  std::uint32_t layer = 0;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
};

struct SparseMessage {
  std::vector<SparseLayer> layers;  // one entry per layout layer, in order
  PayloadBits payload_bits = PayloadBits::b16;

  std::size_t nnz() const;
};

/// Layer-wise low-rank factors. P (rows x rank) has orthonormal columns;
/// Q is (cols x rank). Both row-major. The layer reconstruction is P Q^T.
struct LowRankLayer {
  std::uint32_t layer = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::uint32_t rank = 0;
  std::vector<double> p;
  std::vector<double> q;
};

struct LowRankMessage {
  std::vector<LowRankLayer> layers;
  bool rank_clamped = false;  // warning signal: requested rank exceeded min(n1,n2)
};

using MessagePayload = std::variant<SparseMessage, LowRankMessage>;

/// Per-layer top-k sparsification with bit truncation. Keeps
/// k = max(1, floor(layer_size / rate)) largest-magnitude coordinates per
/// layer (ties broken toward the lowest index); the residual carries the
/// dropped coordinates untouched, and zeros at kept positions.
/// Throws InvalidParameter when rate < 1.
struct SparsifyResult {
  SparseMessage message;
  GradientVector residual;
};
SparsifyResult topk_sparsify(const GradientVector& v, double rate,
                             PayloadBits payload_bits = PayloadBits::b16);

/// Near-square matricization shape for a layer of the given size:
/// rows = ceil(sqrt(size)), cols = ceil(size / rows).
struct MatShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
};
MatShape matricize_shape(std::size_t layer_size);

/// Row-major reshape with zero padding at the tail.
std::vector<double> matricize(std::span<const double> layer_values,
                              MatShape shape);
/// Inverse: first layer_size entries of the row-major matrix.
std::vector<double> dematricize(std::span<const double> matrix, MatShape shape,
                                std::size_t layer_size);

/// Warm-start Q factors carried between low-rank compress calls.
struct LowRankWarmStart {
  std::vector<std::vector<double>> q_per_layer;
};

/// Error-feedback state shared by the stateful compressor entry points.
struct CompressorState {
  GradientVector residual;
  std::optional<LowRankWarmStart> warm_start;

  explicit CompressorState(LayoutPtr layout)
      : residual(GradientVector::zeros(std::move(layout))) {}
};

/// One power-iteration factorization pass (no error feedback): per layer,
/// P = M Q_prev (Q_prev ~ Gaussian when absent), P orthonormalized by
/// modified Gram-Schmidt, Q = M^T P. Returns the message, the residual
/// v - decompress(message), and the Q factors for warm starting. A rank
/// larger than min(rows, cols) is clamped and flagged on the message.
struct FactorizeResult {
  LowRankMessage message;
  GradientVector residual;
  LowRankWarmStart warm_start;
};
FactorizeResult powersgd_factorize(const GradientVector& v, std::uint32_t rank,
                                   const LowRankWarmStart* warm_start,
                                   RngStream& rng, int iterations = 1);

/// Stateful variant: factorizes v + state.residual, stores the new residual
/// and warm start back into state.
struct LowRankCompressResult {
  LowRankMessage message;
  GradientVector residual;
};
LowRankCompressResult powersgd_compress(const GradientVector& v,
                                        std::uint32_t rank,
                                        CompressorState& state, RngStream& rng,
                                        int iterations = 1);

/// Receiver-side reconstruction. Sparse: zeros everywhere but the carried
/// indices. Low-rank: dematricize(P Q^T) per layer. Throws CorruptMessage on
/// out-of-range indices or inconsistent shapes.
GradientVector decompress(const MessagePayload& message, const LayoutPtr& layout);
GradientVector decompress(const SparseMessage& message, const LayoutPtr& layout);
GradientVector decompress(const LowRankMessage& message, const LayoutPtr& layout);

/// COO byte accounting: sparse layers cost nnz*(4 + payload bytes) + 8 each,
/// low-rank layers (rows + cols)*rank*4 + 8 each.
std::uint64_t coo_bytes(const SparseMessage& message);
std::uint64_t coo_bytes(const LowRankMessage& message);
std::uint64_t coo_bytes(const MessagePayload& message);

/// Dense COO cost model for an uncompressed vector sent as-is.
std::uint64_t dense_coo_bytes(const Layout& layout, PayloadBits payload_bits);

// Wire encoding (little-endian). Per-layer header: layer id (4 bytes) then
// nnz or rank (4 bytes). Sparse entries follow as (index: 4 bytes, value:
// payload width); low-rank factors as 4-byte reals, P then Q. The encoded
// size equals coo_bytes exactly. Decoding requires the layout and, for
// sparse messages, the payload width, which travel out of band.
std::vector<std::uint8_t> encode_message(const SparseMessage& message);
std::vector<std::uint8_t> encode_message(const LowRankMessage& message);
SparseMessage decode_sparse_message(std::span<const std::uint8_t> bytes,
                                    PayloadBits payload_bits,
                                    const Layout& layout);
LowRankMessage decode_low_rank_message(std::span<const std::uint8_t> bytes,
                                       const Layout& layout);

/// Pure compression step used by the denoise algorithm and the analysis
/// mechanisms: no internal error feedback (callers own the residual), warm
/// starts only. clone() yields an independent copy with the same
/// configuration and current warm start.
struct CompressOutcome {
  MessagePayload message;
  GradientVector residual;
  bool rank_clamped = false;
};

class Compressor {
 public:
  virtual ~Compressor() = default;
  virtual CompressOutcome compress(const GradientVector& v, RngStream& rng) = 0;
  virtual std::unique_ptr<Compressor> clone() const = 0;
  virtual std::string_view kind() const = 0;
};

std::unique_ptr<Compressor> make_topk_compressor(
    double rate, PayloadBits payload_bits = PayloadBits::b16);
std::unique_ptr<Compressor> make_low_rank_compressor(std::uint32_t rank,
                                                     int iterations = 1);

}  // namespace dpgrad

#endif  // DPGRAD_COMPRESSION_HPP_
