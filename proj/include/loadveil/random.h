// Copyright 2026 The LoadVeil Authors
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

#ifndef LOADVEIL_RANDOM_H_
#define LOADVEIL_RANDOM_H_

#include <cstdint>
#include <random>

namespace loadveil {

// Seedable 64-bit generator with platform-independent derived draws.
// std::uniform_*_distribution is avoided because its output stream is
// implementation defined; every draw here is a fixed function of the
// mt19937_64 stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double Uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform in {0, ..., n - 1}; n must be positive. Rejection sampling keeps
  // the draw unbiased.
  std::uint64_t UniformIndex(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  bool Bernoulli(double p) { return Uniform01() < p; }

 private:
  std::mt19937_64 engine_;
};

// splitmix64 finalizer; used to derive independent per-stream seeds.
inline std::uint64_t MixSeed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for the `index`-th stream under a base seed.
inline std::uint64_t DeriveSeed(std::uint64_t base, std::uint64_t index) {
  return MixSeed(base ^ MixSeed(index));
}

}  // namespace loadveil

#endif  // LOADVEIL_RANDOM_H_
