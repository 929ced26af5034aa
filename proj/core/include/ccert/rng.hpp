#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace ccert {

// splitmix64; used only to expand a 64-bit seed into xoshiro state.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
  std::uint64_t next() noexcept;

 private:
  std::uint64_t state_;
};

// xoshiro256** with Box-Muller normals. The full generator state is the four
// words below, so checkpoints can restore it exactly.
class Rng {
 public:
  using State = std::array<std::uint64_t, 4>;

  explicit Rng(std::uint64_t seed) noexcept;
  static Rng from_state(const State& s) noexcept;

  std::uint64_t next_u64() noexcept;
  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  // Uniform integer in [0, n). n must be > 0.
  std::size_t index(std::size_t n) noexcept;
  // Standard normal; one Box-Muller draw per call (the sine branch is dropped
  // so the state stays four words).
  double normal() noexcept;

  const State& state() const noexcept { return s_; }

 private:
  Rng() = default;
  State s_{};
};

}  // namespace ccert
