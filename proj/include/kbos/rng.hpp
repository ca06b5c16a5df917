#pragma once

#include <array>
#include <cstdint>

namespace kbos {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Pure
// function of (counter, key); streams are addressed by counter words.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Random-access standard normal stream addressed by (seed, stream, index).
// Each Philox block yields two uniforms and, through Box-Muller, the normals
// at indices 2j and 2j+1.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint32_t stream)
      : seed_(seed), stream_(stream) {}

  double at(std::uint64_t index) const;

  // Sequential draw; equivalent to at(0), at(1), ...
  double operator()();

 private:
  void fill(std::uint64_t block);

  std::uint64_t seed_;
  std::uint32_t stream_;
  std::uint64_t next_ = 0;
  std::uint64_t cached_block_ = ~std::uint64_t{0};
  std::array<double, 2> cache_{};
};

}  // namespace kbos
