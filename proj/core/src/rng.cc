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

#include "fedledger/rng.h"

#include <cmath>
#include <numbers>
#include <utility>

namespace fedledger {
namespace {

constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer.
uint64_t Mix(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t Combine(uint64_t key, uint64_t value) {
  return Mix(key ^ Mix(value + kGolden));
}

}  // namespace

RngStream::RngStream(uint64_t seed, uint64_t client, uint64_t round,
                     StreamPurpose purpose) {
  uint64_t key = Mix(seed + kGolden);
  key = Combine(key, client);
  key = Combine(key, round);
  key = Combine(key, static_cast<uint64_t>(purpose));
  key_ = key;
}

RngStream RngStream::Fork(uint64_t salt) const {
  return RngStream(Combine(key_, Mix(salt) ^ 0x5851f42d4c957f2dULL));
}

uint64_t RngStream::NextU64() {
  const uint64_t c = counter_++;
  return Mix(key_ + (c + 1) * kGolden);
}

double RngStream::Uniform() {
  return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
}

double RngStream::UniformPositive() {
  return static_cast<double>((NextU64() >> 11) + 1) * 0x1.0p-53;
}

uint64_t RngStream::UniformInt(uint64_t bound) {
  // Rejection sampling removes modulo bias.
  const uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % bound);
  uint64_t x;
  do {
    x = NextU64();
  } while (x >= limit);
  return x % bound;
}

double RngStream::Gaussian() {
  if (cached_gaussian_.has_value()) {
    const double v = *cached_gaussian_;
    cached_gaussian_.reset();
    return v;
  }
  const double u1 = UniformPositive();
  const double u2 = Uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  cached_gaussian_ = r * std::sin(theta);
  return r * std::cos(theta);
}

double RngStream::Laplace(double scale) {
  const double u = Uniform() - 0.5;
  const double sign = u < 0 ? -1.0 : 1.0;
  return -scale * sign * std::log1p(-2.0 * std::fabs(u));
}

double RngStream::Gamma(double shape) {
  if (shape < 1.0) {
    const double boost = std::pow(UniformPositive(), 1.0 / shape);
    return Gamma(shape + 1.0) * boost;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x;
    double v;
    do {
      x = Gaussian();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = UniformPositive();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

void Shuffle(std::span<std::size_t> items, RngStream& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = rng.UniformInt(i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace fedledger
