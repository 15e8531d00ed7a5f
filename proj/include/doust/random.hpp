#pragma once

#include <cstdint>

namespace doust {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Named sub-streams of one base seed, so that e.g. weight init and batch
/// shuffling of the same submodel never share a generator sequence.
enum class Stream : std::uint64_t {
    init = 1,
    shuffle_pretrain = 2,
    shuffle_refine = 3,
    feature_bag = 4,
    data = 5,
    split = 6,
    baseline = 7,
};

constexpr std::uint64_t derive_seed(std::uint64_t base, Stream stream) noexcept {
    return splitmix64(base ^ splitmix64(static_cast<std::uint64_t>(stream)));
}

}  // namespace doust
