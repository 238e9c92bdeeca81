#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>

namespace mmoment {

namespace detail {
// SplitMix64 finalizer: bijective avalanche on 64 bits.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}
} // namespace detail

// Counter-based stream: the k-th output is a pure function of (seed, stream_id, k),
// so identical (seed, stream_id) gives a bitwise-identical sequence on every platform.
// Streams are cheap values; never share one between workers, derive substreams instead.
class RngStream {
  public:
    RngStream() : RngStream(0, 0) {}
    RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
        : seed_(seed), stream_(stream_id),
          key_(detail::mix64(detail::mix64(seed ^ 0x5851f42d4c957f2dull) ^ stream_id)) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_; }

    // Independent stream keyed off this one; counter starts at zero.
    RngStream substream(std::uint64_t k) const {
        return RngStream(seed_, detail::mix64(stream_ ^ detail::mix64(k ^ 0x94d049bb133111ebull)));
    }

    std::uint64_t next_u64() {
        return detail::mix64(key_ + (counter_++) * 0x9e3779b97f4a7c15ull);
    }

    // Uniform on [0, 1), 53 bits.
    double next_uniform() {
        return double(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0, 1]; safe to pass to log().
    double next_open() {
        return 1.0 - next_uniform();
    }

    double next_sign() { return (next_u64() & 1ull) ? 1.0 : -1.0; }

    double next_exponential() { return -std::log(next_open()); }

    // Box-Muller; no rejection, so consumption per call is fixed.
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = next_open();
        const double u2 = next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

  private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace mmoment
