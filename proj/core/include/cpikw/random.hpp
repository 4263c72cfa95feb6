#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cpikw {

// Platform-stable random source. Only raw mt19937_64 output is used, so
// draws are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Standard normal via Box-Muller.
  double gaussian();
  // Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Mixes a base seed with a label and an index (splitmix64 over FNV-1a).
std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t index = 0);

}  // namespace cpikw
