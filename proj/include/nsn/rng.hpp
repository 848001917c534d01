#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace nsn {

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seeded random stream. Every stochastic routine takes one of these by
/// reference, so a fixed seed reproduces results bit for bit.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix_seed(seed)) {}

    std::uint64_t seed() const { return seed_; }

    /// Child stream keyed by `stream`; does not advance this stream.
    Rng split(std::uint64_t stream) const { return Rng(mix_seed(seed_ ^ mix_seed(stream + 1))); }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

    /// One draw from the categorical distribution given by `probs` (assumed
    /// normalized); inverse CDF, with rounding slack going to the last index
    /// that has non-zero mass.
    std::size_t categorical(std::span<const double> probs) {
        const double u = uniform();
        double acc = 0.0;
        std::size_t last = 0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (probs[i] <= 0.0) continue;
            acc += probs[i];
            last = i;
            if (u < acc) return i;
        }
        return last;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace nsn
