/*
 * Copyright 2026 The mkslib Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MKS_RNG_HPP_
#define MKS_RNG_HPP_

#include <cstdint>

namespace mks {

// SplitMix64 finalizer: the output function of every generator below.
//   z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//   z ^= z >> 27; z *= 0x94D049BB133111EB;
//   z ^= z >> 31;
std::uint64_t mix64(std::uint64_t z);

// Counter-based SplitMix64 stream. The i-th draw (1-based) of a generator
// with state s is mix64(s + i * 0x9E3779B97F4A7C15), so streams are
// reproducible bit-for-bit in any language with 64-bit wrapping arithmetic.
//
//   uniform()  = (next_u64() >> 11) * 2^-53            in [0, 1)
//   normal()   = Box-Muller cosine branch over two uniforms (u1 mapped to
//                (0, 1] as 1 - u1); no caching of the sine branch
//   below(n)   = floor(uniform() * n)
//   fork(k)    = Rng(mix64(state ^ mix64(k + 0x9E3779B97F4A7C15)))
//
// fork() does not advance the parent, so children are addressed by key.
class Rng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::uint64_t below(std::uint64_t n);
  Rng fork(std::uint64_t key) const;

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace mks

#endif  // MKS_RNG_HPP_
