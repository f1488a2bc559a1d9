#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gmrt {

using Rng = std::mt19937_64;

/// Derives an independent sub-stream seed from a master seed, a stream name
/// and an index. Stable across platforms and execution order.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t master, std::string_view stream, std::uint64_t index = 0) {
  return Rng{derive_seed(master, stream, index)};
}

}  // namespace gmrt
