#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace freerun {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// FNV-1a over the bytes of a label, used to turn stream names into path keys.
std::uint64_t label_key(std::string_view label) noexcept;

/// Derives a child seed from a parent seed and a path of keys.
///
/// Each key is folded in as `s = mix64(s ^ mix64(key + i))`, so the result depends on
/// the order and position of every key. Streams that differ in any key are unrelated,
/// and adding new paths never changes the seeds of existing ones.
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path) noexcept;

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

}  // namespace freerun
