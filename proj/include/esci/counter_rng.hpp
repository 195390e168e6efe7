#pragma once

#include <array>
#include <cstdint>

namespace esci {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Output depends only on
/// (key, counter), so every (seed, trial, stream, step) tuple gets its own reproducible
/// draws regardless of which thread evaluates it.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key);
};

/// Gaussian draws addressed by (seed, trial, stream, step). Each address yields
/// two independent N(0, 1) values via Box–Muller.
class NoiseField {
 public:
  explicit NoiseField(std::uint64_t seed) : seed_(seed) {}

  std::array<double, 2> normal_pair(std::uint32_t trial, std::uint32_t stream, std::uint32_t step) const;
  double normal(std::uint32_t trial, std::uint32_t stream, std::uint32_t step) const {
    return normal_pair(trial, stream, step)[0];
  }

 private:
  std::uint64_t seed_;
};

/// One SplitMix64 step from state x (increment, then finalize); used to derive sub-seeds.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace esci
