#ifndef SPILLOVER_IV_RNG_HPP
#define SPILLOVER_IV_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace spiv {

enum class StreamTag : std::uint64_t { profile = 1, instrument = 2, noise = 3, bootstrap = 4, trial = 5, rep = 6 };

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Counter-based stream: the i-th draw is a pure function of (key, i), so draws do
/// not depend on which thread produced them or in what order.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t a, std::uint64_t b, StreamTag tag) noexcept
        : key_(splitmix64(splitmix64(splitmix64(seed ^ (static_cast<std::uint64_t>(tag) << 56)) ^ a) + b)) {}

    std::uint64_t next_u64() noexcept { return splitmix64(key_ + 0xD1B54A32D192ED03ULL * ++counter_); }

    /// Uniform on [0, 1).
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept {
        // Lemire's multiply-shift; bias is below n / 2^64.
        __extension__ using wide = unsigned __int128;
        return static_cast<std::uint64_t>((static_cast<wide>(next_u64()) * n) >> 64);
    }

    double normal() noexcept {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace spiv

#endif  // SPILLOVER_IV_RNG_HPP
