#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <string_view>

namespace colag {

// All randomness flows through named streams derived from one root seed, so a
// run is reproducible regardless of which subsystems draw and in what order
// relative to each other. Draw order *within* one stream is part of the
// contract of whatever owns that stream.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t derive_stream_seed(std::uint64_t root_seed, std::string_view name) {
  return splitmix64(splitmix64(root_seed) ^ fnv1a64(name));
}

/// One named deterministic random stream. The distribution transforms are
/// spelled out here instead of using std:: distributions, whose output is
/// implementation defined.
class RngStream {
 public:
  RngStream() : eng_(0) {}
  RngStream(std::uint64_t root_seed, std::string_view name)
      : eng_(derive_stream_seed(root_seed, name)) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Unbiased integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % n + 1) % n;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x > limit);
    return x % n;
  }

  /// Standard normal via Box-Muller; the pair's second value is cached.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1], keeps log() finite
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = kTwoPi_ * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

 private:
  static constexpr double kTwoPi_ = 6.283185307179586476925286766559;
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Lazily creates streams by name, all derived from one root seed.
class RngRegistry {
 public:
  explicit RngRegistry(std::uint64_t root_seed = 0) : root_seed_(root_seed) {}

  std::uint64_t root_seed() const { return root_seed_; }

  RngStream& stream(const std::string& name) {
    auto it = streams_.find(name);
    if (it == streams_.end())
      it = streams_.emplace(name, RngStream(root_seed_, name)).first;
    return it->second;
  }

 private:
  std::uint64_t root_seed_;
  std::map<std::string, RngStream> streams_;
};

}  // namespace colag
