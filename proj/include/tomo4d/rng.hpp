#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tomo4d {

/// Seeded random stream with portable output. std::mt19937_64 generates the
/// raw bits; the uniform/normal mappings are spelled out here instead of
/// going through std:: distributions, whose output is implementation-defined
/// and would break cross-toolchain reproducibility of seeded runs.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller. Draws two uniforms per call; no state
    /// is cached so the stream position is easy to reason about.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    std::uint64_t next_u64() { return gen_(); }

    /// Derive an independent stream for a sub-task, keyed by label.
    Rng fork(std::uint64_t label) {
        std::uint64_t s = gen_() ^ (label * 0x9e3779b97f4a7c15ull);
        return Rng(s);
    }

  private:
    std::mt19937_64 gen_;
};

} // namespace tomo4d
