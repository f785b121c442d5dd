#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace escada {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-based stream splitting: the seed of a stream depends only on the
/// root seed and the stream's own coordinates, never on how many other
/// streams were drawn before it.
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = splitmix64(root);
    for (auto p : path) {
        s = splitmix64(s ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    }
    return s;
}

// Stable 64-bit FNV-1a, used to turn stream names into path components.
inline std::uint64_t stream_id(const char* name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char* c = name; *c != '\0'; ++c) {
        h ^= static_cast<unsigned char>(*c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace escada
