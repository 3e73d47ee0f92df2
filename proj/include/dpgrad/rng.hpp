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

#ifndef DPGRAD_RNG_HPP_
#define DPGRAD_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace dpgrad {

/// Stable 64-bit FNV-1a, used to derive stream ids from purpose strings so
/// that adding a new analysis never perturbs existing streams.
std::uint64_t fnv1a64(std::string_view text);

/// A seeded, identified random stream. Two streams constructed with the same
/// (seed, stream id) produce bit-identical draw sequences. Streams are
/// single-owner: fork() derives an independent child without consuming any
/// state, so forking is order-independent and safe to do from parallel code.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  /// Stream whose id is the hash of a purpose label ("trial", "noise", ...).
  static RngStream labeled(std::uint64_t seed, std::string_view purpose);

  /// Child stream keyed by (this stream's identity, lane). Pure function of
  /// the identity; does not advance this stream.
  RngStream fork(std::uint64_t lane) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform draw in [0, 1).
  double uniform();

  /// Standard normal draw.
  double normal() { return normal_(engine_); }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace dpgrad

#endif  // DPGRAD_RNG_HPP_
