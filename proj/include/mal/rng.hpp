#pragma once

#include <array>
#include <cstdint>

namespace mal {

/// Counter-based generator built on Philox4x32-10.
///
/// The stream is a pure function of (key, counter), so a generator can be
/// split into independent child streams by hashing a stream id into the
/// key. Work items that each own a child stream produce the same draws no
/// matter how they are scheduled across threads.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed = 0) : key_(seed) {}

  /// Independent child stream; does not advance this generator.
  CounterRng split(std::uint64_t stream_id) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller.
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  using Block = std::array<std::uint32_t, 4>;
  /// Raw Philox4x32-10 bijection of a 128-bit counter under a 64-bit key.
  static Block philox(Block counter, std::uint64_t key);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  Block buffer_{};
  int buffered_ = 0;
};

}  // namespace mal
