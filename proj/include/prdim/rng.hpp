#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace prdim {

// SplitMix64 finalizer; used for seed derivation.
std::uint64_t splitmix64(std::uint64_t x);

// FNV-1a 64-bit over a byte string.
std::uint64_t fnv1a64(std::string_view s);

// Stage-seed derivation rule used across the whole artifact:
//   seed_for(master, stage, idx) = splitmix64(splitmix64(master ^ fnv1a64(stage)) ^ idx)
// Adding a new stage name never perturbs the streams of existing stages.
std::uint64_t seed_for(std::uint64_t master, std::string_view stage, std::uint64_t idx = 0);

// Deterministic RNG used everywhere. Uniform doubles come from the top 53
// bits of mt19937_64; normals from Box-Muller with a cached spare, so the
// draw sequence is fully pinned by the seed (no library-defined distributions).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() { return (gen_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [lo, hi] via rejection-free 64-bit scaling.
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);

    // Standard normal (Box-Muller).
    double normal();

    void fill_normal(std::vector<double>& out);
    void fill_normal(double* out, std::size_t n);

    // Fisher-Yates shuffle of index vector, deterministic given the stream.
    void shuffle(std::vector<std::size_t>& idx);

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace prdim
