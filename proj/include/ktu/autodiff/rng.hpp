/*
 * Copyright (c) 2026 The ktu Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstdint>

namespace ktu {

// Stream-id namespaces. MC dropout passes use the bare sample index as the
// stream id, everything else is tagged so purposes never collide.
enum class StreamPurpose : std::uint64_t {
  kMcSample = 0,
  kInit = 1,
  kTrainDropout = 2,
  kShuffle = 3,
  kSplit = 4,
  kSimBank = 5,
  kSimStudent = 6,
  kSimEmbedding = 7,
  kTest = 15,
};

std::uint64_t stream_id(StreamPurpose purpose, std::uint64_t index);

/// Counter-based generator (Philox-4x32-10). The whole state is
/// (seed, stream, counter), so a draw sequence is a pure function of the
/// (seed, stream) pair on every platform.
class RngStream {
 public:
  static constexpr const char* kAlgorithm = "philox4x32-10";

  RngStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Box-Muller; no cached second variate so the sequence stays counter-pure.
  double normal(double mean = 0.0, double stddev = 1.0);
  // Uniform integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n);

  RngStream fork(StreamPurpose purpose, std::uint64_t index) const;

  static std::array<std::uint32_t, 4> philox_block(std::array<std::uint32_t, 4> counter,
                                                   std::array<std::uint32_t, 2> key);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
};

// Fisher-Yates with RngStream::below.
template <typename Container>
void shuffle_in_place(Container& items, RngStream& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace ktu
