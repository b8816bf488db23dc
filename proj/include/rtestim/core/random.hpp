#ifndef RTESTIM_CORE_RANDOM_HPP
#define RTESTIM_CORE_RANDOM_HPP

#include <cstdint>
#include <random>

namespace rtestim::core {

using Engine = std::mt19937_64;

// SplitMix64 finalizer; used to turn (seed, stream) pairs into independent engine seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

inline Engine make_engine(std::uint64_t seed, std::uint64_t stream) {
  return Engine(derive_seed(seed, stream));
}

}  // namespace rtestim::core

#endif  // RTESTIM_CORE_RANDOM_HPP
