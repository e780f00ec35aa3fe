#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace worldlens {

/// Deterministic random stream. All sampling in the library goes through this
/// wrapper so that a fixed seed reproduces trajectories bit-for-bit on any
/// platform (raw 64-bit draws are mapped to doubles manually instead of via
/// std::uniform_real_distribution, whose output is implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Stream for worker `index`, derived from a root seed. Splitting rule:
    /// root seed XOR worker index into the stream constructor.
    static Rng worker_stream(std::uint64_t root_seed, std::uint64_t index) {
        return Rng(root_seed ^ index);
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Index sampled from an unnormalized non-negative weight vector.
    int categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (total <= 0.0) throw std::runtime_error("categorical: zero total weight");
        double u = uniform01() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size() - 1);
    }

private:
    std::mt19937_64 engine_;
};

/// FNV-1a over a list of integer keys; used to derive per-goal random streams
/// that are stable under reordering of calls (keyed by parameters, not call
/// order).
inline std::uint64_t hash_key(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 1469598103934665603ull;
    for (std::uint64_t p : parts) {
        for (int byte = 0; byte < 8; ++byte) {
            h ^= (p >> (8 * byte)) & 0xffu;
            h *= 1099511628211ull;
        }
    }
    return h;
}

} // namespace worldlens
