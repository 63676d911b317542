#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace riskbandit {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kMixMul1 = 0xBF58476D1CE4E5B9ULL;
inline constexpr std::uint64_t kMixMul2 = 0x94D049BB133111EBULL;
inline constexpr std::uint64_t kSplitSalt = 0x632BE59BD9B4E019ULL;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * kMixMul1;
    z = (z ^ (z >> 27)) * kMixMul2;
    return z ^ (z >> 31);
}

/// Derive an independent child seed for stream `index`.
constexpr std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(seed ^ mix64(index + kSplitSalt));
}

/// Counter-based generator: output n is mix64(key + (n+1) * golden).
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t key = 0) : key_(key) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()() { return next_u64(); }

    std::uint64_t next_u64() {
        ++counter_;
        return mix64(key_ + counter_ * kGolden);
    }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; the paired draw is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace riskbandit
