#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace relcox {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
//
// The 64-bit key is the user seed; the 128-bit counter is split into a
// 64-bit stream id and a 64-bit block index. Distinct (seed, stream) pairs
// give independent, individually reproducible substreams, so replicate r of
// a Monte Carlo loop can be regenerated without replaying replicates 0..r-1.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  Philox4x32() : Philox4x32(0, 0) {}
  Philox4x32(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  // Raw bijection: ten rounds applied to `counter` under `key`.
  static Block encrypt(Block counter, Key key);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Block buffer_{};
  int used_ = 4;
};

// Uniform in the open interval (0, 1), 53 bits.
double uniform_open(Philox4x32& rng);

// Standard exponential via inversion.
double exponential(Philox4x32& rng);

// Standard normal (Box-Muller, no caching so the draw count per call is fixed).
double standard_normal(Philox4x32& rng);

// Uniform integer in [0, n).
std::uint64_t uniform_index(Philox4x32& rng, std::uint64_t n);

// Stream id derived from a label and an index, e.g. ("bootstrap", r).
std::uint64_t substream_id(std::uint64_t domain, std::uint64_t index);

namespace streams {
inline constexpr std::uint64_t kSimulation = 0x53494d;   // "SIM"
inline constexpr std::uint64_t kBootstrap = 0x424f4f54;  // "BOOT"
inline constexpr std::uint64_t kMonteCarlo = 0x4d43;     // "MC"
}  // namespace streams

}  // namespace relcox
