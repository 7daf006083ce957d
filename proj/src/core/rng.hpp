#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pg {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    for (auto p : parts) h = mix64(h ^ mix64(p));
    return h;
}

// Stream tags so that seeds derived for different purposes never collide.
enum class SeedStream : std::uint64_t {
    Sketch = 1,
    Perturb = 2,
    Init = 3,
    Shuffle = 4,
    TrainMask = 5,
    Augment = 6,
    Score = 7,
};

inline std::uint64_t derive_seed(SeedStream stream, std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(stream));
    for (auto p : parts) h = mix64(h ^ mix64(p));
    return h;
}

}  // namespace pg
