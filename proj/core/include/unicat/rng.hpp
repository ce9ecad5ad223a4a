#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "unicat/numerics.hpp"

namespace unicat {

// xoshiro256** 1.0 (Blackman & Vigna), state expanded from a 64-bit seed
// with splitmix64. Normals use Box-Muller with the second variate cached.
// Every conversion from raw bits is implemented here (no <random>
// distributions, whose outputs are implementation-defined), so a seed maps to
// the same stream on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() noexcept;
  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept;
  double normal() noexcept;
  // Unbiased integer on [0, n). Requires n > 0.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

// Independent stream derived from (seed, tag). Same inputs give the same
// stream; different tags give unrelated streams.
Rng split(std::uint64_t seed, std::string_view tag);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

Matrix rng_normal(Rng& rng, std::size_t rows, std::size_t cols);

}  // namespace unicat
