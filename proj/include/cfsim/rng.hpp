// Copyright 2026 The cfsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CFSIM_RNG_HPP
#define CFSIM_RNG_HPP

#include <cstdint>
#include <string_view>

namespace cfsim {
namespace rng {

// Stateless counter-based generator. Every random cell in a simulation is
// addressed as (stream key, counter); the value is a pure function of the
// pair, so results do not depend on evaluation order or thread count.

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
inline constexpr std::uint64_t mix64(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Derive a child stream key from a parent key and a label.
inline constexpr std::uint64_t derive(std::uint64_t key, std::uint64_t label) {
  return mix64(key ^ mix64(label));
}

/// FNV-1a, used to turn column names into stream labels.
inline constexpr std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

inline constexpr std::uint64_t derive(std::uint64_t key,
                                      std::string_view label) {
  return derive(key, hash_name(label));
}

inline constexpr std::uint64_t bits(std::uint64_t key, std::uint64_t counter) {
  return mix64(mix64(key ^ kGolden) + counter * kGolden);
}

/// Uniform draw in the open interval (0, 1); never returns an exact endpoint
/// so that quantile transforms stay finite.
inline double uniform01(std::uint64_t key, std::uint64_t counter) {
  return (static_cast<double>(bits(key, counter) >> 11) + 0.5) * 0x1.0p-53;
}

/// Small sequential generator for places where a stream of draws is more
/// natural than addressed cells (benchmark model generation, resampling).
class Sequence {
 public:
  explicit Sequence(std::uint64_t key) : key_(key), n_(0) {}
  std::uint64_t next_bits() { return bits(key_, n_++); }
  double next_uniform01() { return uniform01(key_, n_++); }
  /// Uniform integer in [0, bound).
  std::uint64_t next_below(std::uint64_t bound) {
    // Rejection-free modulo is fine here: bound is tiny relative to 2^64.
    return next_bits() % bound;
  }

 private:
  std::uint64_t key_;
  std::uint64_t n_;
};

}  // namespace rng
}  // namespace cfsim

#endif  // CFSIM_RNG_HPP
