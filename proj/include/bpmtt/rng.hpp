#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace bpmtt {

using Rng = std::mt19937_64;

/// Purpose tags for independent random substreams.
enum class Stream : std::uint64_t {
  kTruth = 1,
  kFrame = 2,
  kPlan = 3,
  kBirth = 4,
  kPredict = 5,
  kResample = 6,
  kOracle = 7,
  kRun = 8,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based split: the seed of a substream depends only on the master
/// seed and the counters, never on how many draws other streams consumed.
inline std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                 std::initializer_list<std::uint64_t> counters = {}) {
  std::uint64_t h = splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(stream)));
  for (std::uint64_t c : counters) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t master, Stream stream,
                    std::initializer_list<std::uint64_t> counters = {}) {
  return Rng(derive_seed(master, stream, counters));
}

}  // namespace bpmtt
