//
// Copyright 2026 The fedledger Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef FEDLEDGER_RNG_H_
#define FEDLEDGER_RNG_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

namespace fedledger {

// What a stream is used for. Part of the stream key, so two purposes for the
// same (client, round) never share draws.
enum class StreamPurpose : uint32_t {
  kInit = 1,
  kDataGeneration = 2,
  kSplit = 3,
  kPartition = 4,
  kShuffle = 5,
  kFisherSample = 6,
  kNoise = 7,
  kLatency = 8,
  kKeys = 9,
  kTest = 100,
};

// Counter-based random stream. The i-th 64-bit output is a pure function of
// (key, i), where the key mixes (seed, client, round, purpose). Streams never
// share state, so per-client work can run on any thread and still produce the
// same numbers.
class RngStream {
 public:
  RngStream(uint64_t seed, uint64_t client, uint64_t round,
            StreamPurpose purpose);

  // Derives an independent child stream, e.g. one per local epoch.
  RngStream Fork(uint64_t salt) const;

  uint64_t NextU64();

  // Uniform in [0, 1) with 53 random bits.
  double Uniform();

  // Uniform in (0, 1]; safe as a log argument.
  double UniformPositive();

  // Uniform integer in [0, bound). bound must be > 0.
  uint64_t UniformInt(uint64_t bound);

  // Standard normal via Box-Muller. Draws come in pairs; the second value of
  // each pair is cached for the next call.
  double Gaussian();

  // Laplace(0, scale) via inverse CDF.
  double Laplace(double scale);

  // Gamma(shape, 1) via Marsaglia-Tsang, with the U^(1/a) boost for a < 1.
  double Gamma(double shape);

  uint64_t counter() const { return counter_; }

 private:
  explicit RngStream(uint64_t key) : key_(key) {}

  uint64_t key_;
  uint64_t counter_ = 0;
  std::optional<double> cached_gaussian_;
};

// In-place Fisher-Yates shuffle driven by `rng`.
void Shuffle(std::span<std::size_t> items, RngStream& rng);

}  // namespace fedledger

#endif  // FEDLEDGER_RNG_H_
