#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

namespace singlegan {

// All randomness in the toolkit flows through this engine so that a single
// serialized state fully determines future draws.
using Rng = std::mt19937_64;

// Uniform in [0, 1). Uses the top 53 bits of one engine output.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

// Standard normal via Box-Muller. Stateless: consumes exactly two engine
// outputs per call and caches nothing.
double gaussian(Rng& rng);

// Uniform integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);

std::string rng_state(const Rng& rng);
void set_rng_state(Rng& rng, const std::string& state);

}  // namespace singlegan
