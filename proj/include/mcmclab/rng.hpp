#pragma once

#include <cmath>
#include <numbers>
#include <cstdint>
#include <random>

namespace mcmclab {

namespace detail {
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
} // namespace detail

// Reproducible random stream keyed by (master_seed, stream_id). Distinct keys
// go through a SplitMix64 hash before seeding the Mersenne twister, so nearby
// ids give unrelated sequences.
class RngStream {
public:
    explicit RngStream(std::uint64_t master_seed = 0, std::uint64_t stream_id = 0)
        : master_seed_(master_seed), stream_id_(stream_id) {
        std::uint64_t s = detail::splitmix64(master_seed ^ detail::splitmix64(stream_id + 0x632be59bd9b4e019ULL));
        std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                          static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(stream_id),
                          static_cast<std::uint32_t>(stream_id >> 32)};
        engine_.seed(seq);
    }

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    // Child stream for replica `index`; independent of how many draws were made here.
    RngStream derive(std::uint64_t index) const {
        return RngStream(master_seed_, detail::splitmix64(stream_id_ * 0x9e3779b97f4a7c15ULL + index + 1));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n), unbiased by rejection.
    std::uint64_t index(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = std::uint64_t(-1) - (std::uint64_t(-1) % n);
        std::uint64_t r;
        do { r = engine_(); } while (r >= limit);
        return r % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal from two uniforms (cosine branch of Box-Muller).
    double normal() {
        const double u = uniform();
        const double v = uniform();
        return std::sqrt(-2.0 * std::log1p(-u)) * std::cos(2.0 * std::numbers::pi * v);
    }

private:
    std::uint64_t master_seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
};

} // namespace mcmclab
