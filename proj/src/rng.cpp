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

#include "dpgrad/rng.hpp"

namespace dpgrad {
namespace {

// splitmix64 finalizer; decorrelates nearby (seed, stream) pairs before the
// material reaches the engine.
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
  std::uint64_t a = splitmix64(seed);
  std::uint64_t b = splitmix64(a ^ stream_id);
  std::uint64_t c = splitmix64(b ^ 0x5851f42d4c957f2dULL);
  std::uint64_t d = splitmix64(c ^ seed);
  std::seed_seq seq{
      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
      static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32),
      static_cast<std::uint32_t>(d), static_cast<std::uint32_t>(d >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed),
      stream_id_(stream_id),
      engine_(make_engine(seed, stream_id)),
      normal_(0.0, 1.0) {}

RngStream RngStream::labeled(std::uint64_t seed, std::string_view purpose) {
  return RngStream(seed, fnv1a64(purpose));
}

RngStream RngStream::fork(std::uint64_t lane) const {
  // Child identity depends only on (seed, stream id, lane).
  std::uint64_t child = splitmix64(stream_id_ ^ splitmix64(lane + 0x9e3779b9ULL));
  return RngStream(seed_, child);
}

double RngStream::uniform() {
  // 53-bit mantissa fill, exact in [0, 1).
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::below(std::uint64_t bound) {
  // Rejection sampling keeps the draw unbiased.
  std::uint64_t limit = bound * (UINT64_MAX / bound);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

}  // namespace dpgrad
