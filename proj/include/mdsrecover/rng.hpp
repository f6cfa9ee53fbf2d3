#pragma once

// Counter-based random numbers.
//
// The generator is Philox4x32-10 (Salmon et al., "Parallel random numbers:
// as easy as 1, 2, 3"). Streams are addressed by a 64-bit key; replicate
// seeds are derived by hashing (base seed, purpose tag, indices) with a
// SplitMix64 finalizer, so streams never depend on scheduling order.
// Normal deviates use Box-Muller on 53-bit uniforms, which keeps output
// bit-identical across standard libraries.

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace mdsr {

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for one purpose/replicate, e.g. derive_seed(base, "phase", {row, col, rep}).
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                          std::initializer_list<std::uint64_t> indices = {});

/// One Philox4x32-10 block: ten rounds over `counter` under `key`.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

class Philox {
 public:
  using result_type = std::uint32_t;

  explicit Philox(std::uint64_t key, std::uint64_t stream = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return 0xffffffffu; }

  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1].
  double uniform_open_low();
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mdsr
