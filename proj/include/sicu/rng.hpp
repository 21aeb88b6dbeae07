#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sicu {

/// Seeded generator with distribution code written out here rather than
/// taken from <random>, whose distributions are implementation-defined.
/// Streams are therefore identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    int bit() { return static_cast<int>(engine_() >> 63); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n), rejection-sampled (no modulo bias).
    std::uint64_t index(std::uint64_t n);

    /// Standard normal via Box-Muller; caches the second variate.
    double gaussian();

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Per-item seed derivation: independent streams for (seed, id) pairs.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t id);

/// Seed derivation keyed by a label ("train", "test/integer_sir", ...).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

}  // namespace sicu
