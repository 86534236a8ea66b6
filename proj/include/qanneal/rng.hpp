/*
   Copyright 2026 The qanneal Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace qanneal {

using RngSeed = std::uint64_t;

/// SplitMix64 finalizer. Used only to mix seeds, never as the sampling engine.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Sub-stream seed for (run, slice). The mapping is
///   derive_seed(m, r, s) = splitmix64(splitmix64(m ^ splitmix64(r + 1)) ^ splitmix64(~(s + 1)))
/// so that every (run, slice) pair gets an independent stream regardless of
/// the order in which workers pick them up.
constexpr RngSeed derive_seed(RngSeed master, std::uint64_t run, std::uint64_t slice = 0) noexcept {
  return splitmix64(splitmix64(master ^ splitmix64(run + 1)) ^ splitmix64(~(slice + 1)));
}

/// Seedable Mersenne-Twister stream with portable uniform draws.
///
/// Uniform doubles and bounded integers are produced from raw 64-bit words
/// directly, so sequences are identical across standard libraries.
class Rng {
 public:
  explicit Rng(RngSeed seed = 0) : seed_(seed), engine_(seed) {}

  RngSeed seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    // Lemire's multiply-shift with rejection.
    std::uint64_t x = engine_();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        x = engine_();
        m = static_cast<__uint128_t>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Standard normal via Box-Muller on the portable uniform draws.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  int spin() { return (engine_() >> 63) ? 1 : -1; }

  std::string serialize() const {
    std::ostringstream os;
    os << seed_ << ' ' << has_spare_ << ' ';
    os.precision(17);
    os << spare_ << ' ' << engine_;
    return os.str();
  }

  static Rng deserialize(const std::string& text) {
    std::istringstream is(text);
    Rng rng;
    is >> rng.seed_ >> rng.has_spare_ >> rng.spare_ >> rng.engine_;
    return rng;
  }

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.seed_ == b.seed_ && a.has_spare_ == b.has_spare_ && a.engine_ == b.engine_;
  }

 private:
  RngSeed seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace qanneal
