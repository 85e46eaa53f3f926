#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace ldrld::detail {

/// mt19937_64 seeded from a list of 64-bit words through std::seed_seq.
inline std::mt19937_64 seeded_rng(std::initializer_list<std::uint64_t> words) {
  std::vector<std::uint32_t> parts;
  for (std::uint64_t w : words) {
    parts.push_back(static_cast<std::uint32_t>(w));
    parts.push_back(static_cast<std::uint32_t>(w >> 32));
  }
  std::seed_seq seq(parts.begin(), parts.end());
  return std::mt19937_64(seq);
}

}  // namespace ldrld::detail
