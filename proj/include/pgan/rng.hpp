#pragma once

#include <cstdint>
#include <random>

namespace pgan {

/// Deterministic random stream. The engine is the standard-specified
/// mt19937_64; every distribution is hand-rolled on top of raw 64-bit
/// draws so that sequences are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t bits() { return eng_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(bits()) * n) >> 64);
    }

    /// Standard normal via Box-Muller (one value per call, no caching).
    double normal();

    /// Poisson-distributed count (Knuth's product method; fine for small mean).
    int poisson(double mean);

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& xs) {
        for (std::size_t i = xs.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(xs[i - 1], xs[j]);
        }
    }

private:
    std::mt19937_64 eng_;
};

/// Mixes a seed with salts into a fresh stream seed (splitmix64 finalizer).
/// Used to derive independent per-image / per-epoch / per-module streams
/// from a single root seed.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t salt_a,
                          std::uint64_t salt_b = 0);

} // namespace pgan
