#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

namespace srl {

// Counter-free splitmix64 stream. Streams for parallel work are derived by
// hashing (seed, label, index) so execution order never changes results.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0,1)
    double uniform() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // uniform in (0,1], safe as a log() argument
    double uniform_pos() {
        return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller, no cached spare so the draw count per call is fixed
    double gaussian() {
        double u1 = uniform_pos();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // integer in [0, n)
    uint64_t below(uint64_t n) {
        // multiply-shift; bias is negligible for our n << 2^64
        return static_cast<uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
    }

private:
    uint64_t state_;
};

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Stream derivation rule: mix seed, a textual label (e.g. stock symbol) and a
// trial index through one splitmix round each.
inline uint64_t derive_stream(uint64_t seed, std::string_view label, uint64_t index = 0) {
    SplitMix64 mix(seed ^ fnv1a64(label));
    uint64_t a = mix.next();
    SplitMix64 mix2(a ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
    return mix2.next();
}

inline constexpr const char* kRngAlgorithm = "splitmix64/fnv1a-stream-derivation";

} // namespace srl
