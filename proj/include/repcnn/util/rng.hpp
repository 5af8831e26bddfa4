#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace repcnn {

// Deterministic random source. All draws go through explicit helpers built on
// the raw mt19937 output so that sequences are identical across standard
// library implementations (std::uniform_* distributions are not portable).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        // splitmix64 expansion of the seed into the mt19937 state word
        state_ = seed;
        engine_seed_ = static_cast<std::uint32_t>(next_u64() >> 32);
        x_ = engine_seed_ != 0 ? engine_seed_ : 0x9e3779b9u;
        // warm up xorshift a little
        for (int i = 0; i < 8; ++i) (void)u32();
        have_gauss_ = false;
    }

    std::uint32_t u32() {
        // xorshift32
        std::uint32_t x = x_;
        x ^= x << 13;
        x ^= x >> 17;
        x ^= x << 5;
        x_ = x;
        return x;
    }

    std::uint64_t u64() {
        std::uint64_t hi = u32();
        return (hi << 32) | u32();
    }

    // uniform in [0, 1)
    double unit() { return (u64() >> 11) * 0x1.0p-53; }

    float uniform(float lo, float hi) {
        return lo + static_cast<float>(unit()) * (hi - lo);
    }

    // inclusive bounds
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(unit() * (static_cast<double>(hi) - lo + 1));
    }

    float normal() {
        // Box-Muller, cached second value
        if (have_gauss_) {
            have_gauss_ = false;
            return gauss_;
        }
        double u1 = 0.0;
        while (u1 <= 1e-300) u1 = unit();
        double u2 = unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        gauss_ = static_cast<float>(r * std::sin(a));
        have_gauss_ = true;
        return static_cast<float>(r * std::cos(a));
    }

private:
    std::uint64_t next_u64() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_ = 0;
    std::uint32_t engine_seed_ = 0;
    std::uint32_t x_ = 0x9e3779b9u;
    bool have_gauss_ = false;
    float gauss_ = 0.0f;
};

// Stable seed derivation for per-utterance / per-epoch streams.
inline std::uint64_t derive_seed(std::uint64_t global_seed, const std::string& id,
                                 std::uint64_t salt = 0) {
    // FNV-1a over the id, mixed with seed and salt
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    mix(global_seed);
    for (unsigned char c : id) {
        h ^= c;
        h *= 1099511628211ull;
    }
    mix(salt);
    return h;
}

}  // namespace repcnn
