#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "labelfuse/errors.hpp"

// Self-contained random number generation. Standard-library distributions are
// implementation-defined, so every draw here is spelled out explicitly to keep
// results bit-reproducible across compilers and platforms.

namespace labelfuse {

// SplitMix64 finalizer; also used to derive child seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Deterministic child seed: distinct per (parent, index), order-independent.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
    return mix64(parent + 0x9E3779B97F4A7C15ULL * (index + 1));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform on the open interval (0, 1); never returns 0 or 1, so it is
    // safe inside logs and inverse transforms.
    double uniform01() {
        return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    }

    bool bernoulli(double p) {
        if (p < 0.0 || p > 1.0) throw ValueOutOfRange("bernoulli: p outside [0, 1]");
        return uniform01() < p;
    }

    // Unbiased integer in [0, bound) via rejection sampling.
    std::uint64_t bounded(std::uint64_t bound) {
        if (bound == 0) throw ValueOutOfRange("bounded: bound must be positive");
        std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            std::uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    // Standard normal via Box-Muller (cosine branch).
    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
    }

    // Gamma(shape, 1) via Marsaglia-Tsang; shapes below 1 use the boost
    // Gamma(a) = Gamma(a + 1) * U^{1/a}.
    double gamma(double shape) {
        if (shape <= 0.0) throw ValueOutOfRange("gamma: shape must be positive");
        if (shape < 1.0) {
            double u = uniform01();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform01();
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
        }
    }

    double beta(double a, double b) {
        if (a <= 0.0 || b <= 0.0) throw ValueOutOfRange("beta: parameters must be positive");
        double x = gamma(a);
        double y = gamma(b);
        double s = x + y;
        if (s <= 0.0) return a / (a + b); // both draws underflowed to zero
        return x / s;
    }

    // In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::size_t j = static_cast<std::size_t>(bounded(i + 1));
            using std::swap;
            swap(v[i], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

} // namespace labelfuse
