#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace drs {

/// Stream identifiers used when deriving independent RNG streams from one
/// run-level seed. Keeping the tags in one place guarantees two subsystems
/// never alias the same stream.
enum class StreamTag : std::uint64_t {
  kInit = 1,
  kNegativeSampling = 2,
  kTapShuffle = 3,
  kEpochShuffle = 4,
  kMasking = 5,
  kDropout = 6,
  kSynth = 7,
};

namespace detail {
inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Deterministic splitmix64 generator. Streams are addressed by a seed plus
/// a derivation path, so per-item sampling can run in any order (or in
/// parallel) and still produce identical output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(detail::mix64(seed + detail::kGolden)) {}

  static Rng from_path(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = detail::mix64(seed + detail::kGolden);
    for (std::uint64_t p : path) {
      h = detail::mix64(h ^ detail::mix64(p + detail::kGolden));
    }
    Rng rng(0);
    rng.state_ = h;
    return rng;
  }

  static Rng from_path(std::uint64_t seed, StreamTag tag,
                       std::initializer_list<std::uint64_t> rest = {}) {
    std::uint64_t h = detail::mix64(seed + detail::kGolden);
    h = detail::mix64(h ^ detail::mix64(static_cast<std::uint64_t>(tag) + detail::kGolden));
    for (std::uint64_t p : rest) {
      h = detail::mix64(h ^ detail::mix64(p + detail::kGolden));
    }
    Rng rng(0);
    rng.state_ = h;
    return rng;
  }

  std::uint64_t next_u64() {
    state_ += detail::kGolden;
    return detail::mix64(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (one value per call, no cached spare).
  double next_gaussian() {
    const double u1 = 1.0 - next_unit();  // (0, 1], keeps log finite
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Normal(0, stddev) rejected outside +-clip_sigmas standard deviations.
  double next_truncated_gaussian(double stddev, double clip_sigmas = 2.0) {
    double z = next_gaussian();
    while (std::abs(z) > clip_sigmas) {
      z = next_gaussian();
    }
    return stddev * z;
  }

  /// Exact uniform integer in [0, n). Lemire's multiply-reject method.
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t x = next_u64();
    unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = -n % n;
      while (low < threshold) {
        x = next_u64();
        m = static_cast<unsigned __int128>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace drs
