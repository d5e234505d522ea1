#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace coopuplink::rng {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A block is a
/// pure function of (key, counter), so any sample can be regenerated without
/// replaying a sequence.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    explicit constexpr Philox4x32(Key key) : key_(key) {}

    constexpr Counter operator()(Counter ctr) const {
        Key k = key_;
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                k[0] += kWeyl0;
                k[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k[0],
                   static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k[1],
                   static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    Key key_;
};

/// SplitMix64 finaliser; used to derive keys from user seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Handle to one reproducible random stream. Draws are addressed by
/// (sample index, device index, round), so generation order never matters.
struct Stream {
    std::uint64_t seed = 0;
    /// Separates independent uses of the same seed (scenario, purpose).
    std::uint64_t stream_id = 0;
    /// Global index of the first sample produced through this handle.
    std::uint64_t first_sample = 0;

    Philox4x32 engine() const {
        const std::uint64_t k = mix64(seed ^ mix64(stream_id));
        return Philox4x32({static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)});
    }
};

/// Four 32-bit words for (sample, device, round).
inline Philox4x32::Counter draw(const Philox4x32& eng, std::uint64_t sample,
                                std::uint32_t device, std::uint32_t round = 0) {
    return eng({static_cast<std::uint32_t>(sample), static_cast<std::uint32_t>(sample >> 32),
                device, round});
}

/// Uniform on the open interval (0, 1).
constexpr double to_unit(std::uint32_t w) {
    return (static_cast<double>(w) + 0.5) * 0x1p-32;
}

/// Box-Muller: two independent standard normals from two words.
inline std::array<double, 2> normal_pair(std::uint32_t w0, std::uint32_t w1) {
    const double r = std::sqrt(-2.0 * std::log(to_unit(w0)));
    const double phi = 2.0 * std::numbers::pi * to_unit(w1);
    return {r * std::cos(phi), r * std::sin(phi)};
}

}  // namespace coopuplink::rng
