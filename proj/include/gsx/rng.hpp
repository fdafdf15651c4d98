#pragma once

#include <array>
#include <cstdint>

#include "gsx/normal.hpp"

namespace gsx {

/// splitmix64 finalizer; derives independent sub-seeds from (seed, salt).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Philox4x32-10 counter-based generator (Salmon et al., Random123 family).
// A draw is addressed by (key = seed, counter = [index, stream]); streams
// indexed by a 64-bit id are independent, so parallel consumers can share a
// seed without coordination.
class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream) {}

    /// Uniform double in the open interval (0, 1).
    double next_u01() {
        if (have_ == 0) refill();
        --have_;
        std::uint64_t bits = buffered_[have_];
        return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via inverse-CDF transform.
    double next_normal() { return norm_quantile(next_u01()); }

  private:
    void refill() {
        std::array<std::uint32_t, 4> ctr = {
            static_cast<std::uint32_t>(index_), static_cast<std::uint32_t>(index_ >> 32),
            static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
        ++index_;
        std::uint32_t k0 = key_[0], k1 = key_[1];
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = 0xD2511F53ULL * ctr[0];
            const std::uint64_t p1 = 0xCD9E8D57ULL * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k0,
                   static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k1,
                   static_cast<std::uint32_t>(p0)};
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        buffered_[0] = (static_cast<std::uint64_t>(ctr[0]) << 32) | ctr[1];
        buffered_[1] = (static_cast<std::uint64_t>(ctr[2]) << 32) | ctr[3];
        have_ = 2;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t index_ = 0;
    std::array<std::uint64_t, 2> buffered_{};
    int have_ = 0;
};

}  // namespace gsx
