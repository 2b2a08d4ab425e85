#ifndef MRABGCN_RNG_HPP
#define MRABGCN_RNG_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace mrabgcn {

/// SplitMix64 (Steele, Lea and Flood 2014): a 64-bit Weyl counter
/// (increment 0x9e3779b97f4a7c15) passed through a fixed mixing function.
/// Output k depends only on seed + k * increment, so sequences are
/// bit-reproducible on every platform.
///
/// Derived draws are specified here rather than delegated to <random>
/// distributions, whose algorithms are implementation-defined:
///   uniform()  = (next() >> 11) * 2^-53, in [0, 1)
///   below(n)   = high 64 bits of next() * n
///   normal()   = Box-Muller cosine branch, u1 = 1 - uniform(), u2 = uniform()
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return next(); }

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t below(std::uint64_t n) {
        __extension__ using Wide = unsigned __int128;
        return static_cast<std::uint64_t>((static_cast<Wide>(next()) * n) >> 64);
    }

    double normal() {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    [[nodiscard]] std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

using Rng = SplitMix64;

} // namespace mrabgcn

#endif // MRABGCN_RNG_HPP
