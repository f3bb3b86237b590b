#pragma once

#include <cstdint>
#include <random>

namespace darkspin::rng {

std::uint64_t splitmix64(std::uint64_t x);

// Independent stream seed for item `index` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// mt19937_64 with distribution code pinned here so streams are identical across standard libraries.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : eng_(seed) {}

  double uniform();      // (0, 1)
  double exponential();  // rate 1
  double normal();       // N(0, 1), Box-Muller

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace darkspin::rng
