#pragma once

#include <cstdint>
#include <vector>

namespace plr {

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Counter-based splitmix64 generator. Streams derived from the same seed
/// with distinct keys are statistically independent, so per-trial and
/// per-replicate streams can be drawn in any order without coordination.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return detail::mix64(state_);
  }

  /// Uniform in [0,1) with 53-bit resolution.
  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in the open interval (0,1).
  double uniform_open01() {
    return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound).
  std::uint64_t next_below(std::uint64_t bound) {
    return next_u64() % bound;
  }

  /// An independent child stream keyed by `key`.
  RngStream split(std::uint64_t key) const {
    return RngStream(detail::mix64(state_ ^ detail::mix64(key + 0x9E3779B97F4A7C15ULL)));
  }

 private:
  std::uint64_t state_;
};

/// Order-independent seed derivation for (master, cell, trial) tuples.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = detail::mix64(master + 0x9E3779B97F4A7C15ULL);
  for (std::uint64_t k : keys) h = detail::mix64(h ^ detail::mix64(k + 0xD1B54A32D192ED03ULL));
  return h;
}

/// Fisher-Yates shuffle driven by the stream.
template <typename T>
void shuffle(std::vector<T>& v, RngStream& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = std::size_t(rng.next_below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace plr
