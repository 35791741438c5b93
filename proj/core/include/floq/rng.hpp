#pragma once

#include <cstdint>
#include <random>

namespace floq {

// mt19937_64 is bit-specified by the standard, but std:: distributions are
// not, so the few draws we need are written out here. Every stochastic
// component derives its stream from a user seed through mix_seed, which keeps
// outputs reproducible across platforms and independent of evaluation order.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform in [0, n), unbiased via rejection.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) {
                return r % n;
            }
        }
    }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(below(n)); }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 eng_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a) { return splitmix64(a); }

template <class... Rest>
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, Rest... rest) {
    return mix_seed(splitmix64(a) ^ (b + 0x9e3779b97f4a7c15ULL), rest...);
}

}  // namespace floq
