#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace phasetip {

// Counter-based generator: output k of a stream is a pure function of
// (key, k), so each (seed, replicate, subject) triple owns an independent
// stream regardless of iteration order or thread count. The mixing
// function is the SplitMix64 finalizer.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept { return mix(key_ + kGolden * ++counter_); }

  // Uniform on the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Exponential with the given rate by inversion.
  double exponential(double rate) noexcept { return -std::log(uniform()) / rate; }

  std::uint64_t key() const noexcept { return key_; }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// FNV-1a, used to fold subject ids into stream keys.
constexpr std::uint64_t hash_id(std::string_view id) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : id) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t replicate,
                                   std::string_view subject_id,
                                   std::uint64_t purpose = 0) noexcept {
  std::uint64_t k = CounterRng::mix(seed ^ 0x6a09e667f3bcc909ULL);
  k = CounterRng::mix(k ^ (replicate + 0x3c6ef372fe94f82bULL));
  k = CounterRng::mix(k ^ hash_id(subject_id));
  return CounterRng::mix(k ^ (purpose * 0xa54ff53a5f1d36f1ULL));
}

}  // namespace phasetip
