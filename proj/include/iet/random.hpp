#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace iet {

inline constexpr const char* rng_algorithm = "mt19937_64/splitmix64-seeded";
inline constexpr int rng_version = 1;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/**
 * Reproducible stream indexed by (seed, stream id). Variates are built from
 * raw 64-bit draws by hand so output does not depend on the standard
 * library's distribution implementations.
 */
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : engine_(splitmix64(splitmix64(seed) ^ splitmix64(~stream_id))) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1].
    double uniform_pos() { return 1.0 - uniform(); }

    double exponential() { return -std::log(uniform_pos()); }

    /// Standard normal by Box-Muller; one value per call.
    double normal() {
        const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
        return r * std::cos(2.0 * M_PI * uniform());
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
        std::uint64_t x;
        do x = engine_(); while (x >= limit);
        return x % n;
    }

    /// Uniform (Lebesgue) point of the open simplex {x > 0, sum x = 1}.
    std::vector<double> simplex_point(int m) {
        std::vector<double> x(m);
        double t = 0.0;
        for (double& v : x) t += (v = exponential());
        for (double& v : x) v /= t;
        return x;
    }

private:
    std::mt19937_64 engine_;
};

inline RngStream rng_stream(std::uint64_t seed, std::uint64_t stream_id) { return {seed, stream_id}; }

}  // namespace iet
