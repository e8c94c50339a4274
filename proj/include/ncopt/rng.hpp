#ifndef NCOPT_RNG_HPP
#define NCOPT_RNG_HPP

#include <cstdint>
#include <random>

namespace ncopt {

/// splitmix64 finalizer; used to mix seed components into well-spread
/// 64-bit streams so that nearby (seed, index) pairs give unrelated RNGs.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministically derive a child seed from a parent seed and up to four
/// stream indices (generation, individual, scenario, replicate, ...).
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0,
                                 std::uint64_t d = 0) {
    std::uint64_t s = mix64(parent ^ 0xd1b54a32d192ed03ULL);
    s = mix64(s ^ mix64(a));
    s = mix64(s ^ mix64(b ^ 0xaef17502108ef2d9ULL));
    s = mix64(s ^ mix64(c ^ 0x2545f4914f6cdd1dULL));
    s = mix64(s ^ mix64(d ^ 0x9e6c63d0876a9a35ULL));
    return s;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

} // namespace ncopt

#endif
