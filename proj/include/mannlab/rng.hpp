#pragma once

#include <cstdint>
#include <random>

#include "mannlab/common.hpp"

namespace mannlab {

/// SplitMix64 finalizer, used to derive independent sub-seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based seed splitting: stream k of a root seed is
/// splitmix64(root ^ splitmix64(k)). Every sub-task draws from its own
/// stream, so results do not depend on execution order.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) {
    return splitmix64(root ^ splitmix64(stream));
}

/// Well-known stream ids.
namespace streams {
inline constexpr std::uint64_t kSmoothness = 1;
inline constexpr std::uint64_t kCertify = 2;
inline constexpr std::uint64_t kLemma21 = 3;
inline constexpr std::uint64_t kSweepBase = 1000;
}  // namespace streams

/// Deterministic sampler. Uniform draws are built from the raw 64-bit
/// engine output so streams are identical across standard libraries.
class Sampler {
 public:
    explicit Sampler(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    Vector uniform_box(int dim, double box) {
        Vector v(dim);
        for (int i = 0; i < dim; ++i) v[i] = uniform(-box, box);
        return v;
    }

    Vector normal_vector(int dim) {
        Vector v(dim);
        for (int i = 0; i < dim; ++i) v[i] = normal();
        return v;
    }

 private:
    std::mt19937_64 engine_;
};

}  // namespace mannlab
