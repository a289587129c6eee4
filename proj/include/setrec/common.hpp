#pragma once

#include <cstdint>
#include <cstdio>
#include <random>
#include <string>

namespace setrec {

using Rng = std::mt19937_64;

// splitmix64; used to derive independent seeds from a base seed plus tags,
// so every stochastic component owns an explicit seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    return mix_seed(base ^ mix_seed(tag));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag_a, std::uint64_t tag_b) {
    return derive_seed(derive_seed(base, tag_a), tag_b);
}

// Locale-independent formatting helpers (CSV output must be byte-stable).
inline std::string format_double(double v, const char* fmt = "%.6f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

inline std::string format_compact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace setrec
