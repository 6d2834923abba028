#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace dmvc {

/// Stream tags so every stochastic choice draws from its own seeded generator.
enum class RngStream : std::uint64_t {
  init = 1,
  shuffle = 2,
  noise = 3,
  kmeans = 4,
  pretrain = 5,
  synth = 6,
  generate = 7,
};

/// Generator that is a pure function of (seed, stream, coordinates...).
inline std::mt19937_64 make_rng(std::uint64_t seed, RngStream stream,
                                std::initializer_list<std::uint64_t> coords = {}) {
  std::vector<std::uint32_t> words;
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  push(static_cast<std::uint64_t>(stream));
  for (auto c : coords) push(c);
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace dmvc
