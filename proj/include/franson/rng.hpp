// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

namespace franson {

namespace detail {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Deterministic, platform-independent generator (splitmix64 core).
/// The standard library distributions are implementation-defined, so all
/// sampling used by the simulator is done here to keep seeded runs
/// bit-identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // Warm up so nearby seeds decorrelate immediately.
        detail::splitmix64_next(state_);
        detail::splitmix64_next(state_);
    }

    std::uint64_t next_u64() { return detail::splitmix64_next(state_); }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1], safe as a log argument.
    double uniform_pos() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    /// Exponential with the given rate (events per unit time).
    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

    /// Standard normal via Box-Muller (second deviate cached).
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform_pos();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.28318530717958647692 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    double normal(double sigma) { return sigma * normal(); }

private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

/// Derives an independent child seed from a master seed and stream indices.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t s = master;
    detail::splitmix64_next(s);
    s ^= 0x165667b19e3779f9ULL * (a + 1);
    detail::splitmix64_next(s);
    s ^= 0x27d4eb2f165667c5ULL * (b + 1);
    return detail::splitmix64_next(s);
}

}  // namespace franson
