#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace segbias {

/// All randomness flows through explicitly seeded 64-bit Mersenne Twister
/// streams. The conversions below are spelled out (rather than using the
/// <random> distributions) so that draws are identical across standard
/// library implementations.
using Rng = std::mt19937_64;

/// Independent stream derived from a base seed and a label (splitmix64 mix).
Rng make_stream(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);

double uniform01(Rng& rng);                  // [0, 1)
double uniform(Rng& rng, double lo, double hi);
double standard_normal(Rng& rng);            // Box-Muller, one draw per call
std::size_t uniform_index(Rng& rng, std::size_t n);  // [0, n)

template <typename T>
void shuffle(Rng& rng, std::span<T> values) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    std::swap(values[i - 1], values[j]);
  }
}

template <typename T>
void shuffle(Rng& rng, std::vector<T>& values) {
  shuffle(rng, std::span<T>(values));
}

std::vector<std::size_t> permutation(Rng& rng, std::size_t n);

}  // namespace segbias
