#ifndef CAUSALNL_COMMON_HPP
#define CAUSALNL_COMMON_HPP

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace causalnl {

// Malformed or truncated file content.
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Inputs that are individually well-formed but mutually inconsistent.
struct ConsistencyError : std::runtime_error {
    explicit ConsistencyError(const std::string& what) : std::runtime_error(what) {}
};

// A training run produced non-finite losses and was aborted.
struct DivergedError : std::runtime_error {
    explicit DivergedError(const std::string& what) : std::runtime_error(what) {}
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable stream seed for (base seed, stream index) pairs, e.g. per-epoch
// shuffles. std::hash is implementation-defined; this is not.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(splitmix64(base) ^ splitmix64(stream + 0x51ed270b7a9f1a2dULL));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }

} // namespace causalnl

#endif
