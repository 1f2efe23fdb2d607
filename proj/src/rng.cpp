#include "prdim/rng.hpp"

#include <cmath>
#include <numbers>

namespace prdim {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

std::uint64_t seed_for(std::uint64_t master, std::string_view stage, std::uint64_t idx) {
    return splitmix64(splitmix64(master ^ fnv1a64(stage)) ^ idx);
}

std::uint64_t Rng::uniform_int(std::uint64_t lo, std::uint64_t hi) {
    // hi-lo+1 never approaches 2^64 in this codebase, so modulo bias is
    // below 2^-50 and irrelevant; determinism is what matters here.
    std::uint64_t span = hi - lo + 1;
    return lo + gen_() % span;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // u1 in (0,1] so log(u1) is finite.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

void Rng::fill_normal(std::vector<double>& out) { fill_normal(out.data(), out.size()); }

void Rng::fill_normal(double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = normal();
}

void Rng::shuffle(std::vector<std::size_t>& idx) {
    if (idx.empty()) return;
    for (std::size_t i = idx.size() - 1; i > 0; --i) {
        std::size_t j = (std::size_t)uniform_int(0, i);
        std::swap(idx[i], idx[j]);
    }
}

} // namespace prdim
