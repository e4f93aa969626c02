#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace bbmtraps {

/// 64-bit finalizer used to derive independent stream keys.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t combine_keys(std::uint64_t parent, std::uint64_t tag) noexcept {
  return mix64(parent ^ mix64(tag + 0x632be59bd9b4e019ULL));
}

/// Maps 64 random bits to the open interval (0, 1).
inline double to_unit_interval(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Named substream tags. Every source of randomness in a replicate draws from
/// exactly one of these so that adding a statistic never perturbs another.
enum class StreamTag : std::uint64_t {
  kReplicate = 1,
  kTree = 2,
  kField = 3,
  kBridge = 4,
  kLookahead = 5,
  kLineSelection = 6,
};

/// Seeded random stream identified by a key. Streams are cheap to derive and
/// never share state, so each worker owns its streams outright.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t key) : key_(key), engine_(mix64(key)) {}

  RngStream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) : RngStream(derive(seed, path)) {}

  static std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t key = mix64(seed);
    for (auto p : path) key = combine_keys(key, p);
    return key;
  }

  std::uint64_t key() const noexcept { return key_; }

  RngStream substream(std::uint64_t tag) const { return RngStream(combine_keys(key_, tag)); }
  RngStream substream(StreamTag tag) const { return substream(static_cast<std::uint64_t>(tag)); }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  double uniform() { return to_unit_interval(engine_()); }

  double normal() { return normal_(engine_); }

  /// Exponential waiting time; rate 0 gives +inf.
  double exponential(double rate) {
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    return -std::log(uniform()) / rate;
  }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace bbmtraps
