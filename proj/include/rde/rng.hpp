#pragma once

#include <array>
#include <cstdint>

namespace rde {

/// Philox4x32-10 block function (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
        ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
               static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
               static_cast<std::uint32_t>(p0)};
        key[0] += kW0;
        key[1] += kW1;
    }
    return ctr;
}

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Independent stream families derived from one master seed.
enum class Purpose : std::uint64_t {
    Omega = 1,  // map selection
    Tail = 2,   // unseen low-order digits of the orbit state
    Init = 3,   // initial point
    Tail2 = 4,  // second coordinate of doubled orbits
    Init2 = 5,
    Aux = 6,  // experiment-specific extra batches
};

/// Counter-based stream keyed by (seed, purpose) with the replica index in
/// the high counter words, so every (seed, purpose, replica) triple is an
/// independent reproducible sequence.
class Stream {
public:
    Stream(std::uint64_t seed, Purpose purpose, std::uint64_t replica) {
        const std::uint64_t k =
            splitmix64(seed ^ (static_cast<std::uint64_t>(purpose) * 0xd1b54a32d192ed03ULL));
        key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
        ctr_ = {0u, 0u, static_cast<std::uint32_t>(replica),
                static_cast<std::uint32_t>(replica >> 32)};
    }

    std::uint32_t next_u32() {
        if (pos_ == 4) refill();
        return buf_[pos_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// k random bits, 1 <= k <= 32.
    std::uint32_t bits(int k) {
        if (avail_ < k) {
            reservoir_ = next_u64();
            avail_ = 64;
        }
        const auto out = static_cast<std::uint32_t>(reservoir_ & ((std::uint64_t{1} << k) - 1));
        reservoir_ >>= k;
        avail_ -= k;
        return out;
    }

    /// Uniform on {0, ..., range - 1} (Lemire's multiply-shift with rejection).
    std::uint32_t bounded(std::uint32_t range) {
        std::uint64_t m = static_cast<std::uint64_t>(next_u32()) * range;
        auto low = static_cast<std::uint32_t>(m);
        if (low < range) {
            const std::uint32_t threshold = (0u - range) % range;
            while (low < threshold) {
                m = static_cast<std::uint64_t>(next_u32()) * range;
                low = static_cast<std::uint32_t>(m);
            }
        }
        return static_cast<std::uint32_t>(m >> 32);
    }

private:
    [[gnu::noinline]] void refill() {
        buf_ = philox4x32(ctr_, key_);
        if (++ctr_[0] == 0) ++ctr_[1];
        pos_ = 0;
    }

    std::array<std::uint32_t, 2> key_{};
    std::array<std::uint32_t, 4> ctr_{};
    std::array<std::uint32_t, 4> buf_{};
    int pos_ = 4;
    std::uint64_t reservoir_ = 0;
    int avail_ = 0;
};

}  // namespace rde
