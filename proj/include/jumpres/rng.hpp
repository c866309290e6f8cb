#ifndef JUMPRES_RNG_HPP
#define JUMPRES_RNG_HPP

#include <cmath>
#include <cstdint>

namespace jumpres {

/// splitmix64 step, used for seeding and stream derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// xoshiro256++ with counter-based stream construction: the stream for
/// (seed, stream_id) is a pure function of both, so path ensembles are
/// reproducible bit-for-bit no matter how paths are sharded over workers.
class Rng {
public:
    Rng() : Rng(0, 0) {}

    Rng(std::uint64_t seed, std::uint64_t stream_id) {
        std::uint64_t x = seed ^ (0xA0761D6478BD642FULL * (stream_id + 1));
        s_[0] = splitmix64(x);
        s_[1] = splitmix64(x);
        s_[2] = splitmix64(x);
        s_[3] = splitmix64(x);
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// uniform on [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// uniform on (0, 1], safe as a log argument
    double uniform_pos() {
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// uniform on the open interval (0, 1)
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// standard exponential
    double exponential() { return -std::log(uniform_pos()); }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

}  // namespace jumpres

#endif
