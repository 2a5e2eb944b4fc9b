#pragma once

// Paired comparison of a graded CW vector against uniform windows on the
// linear chain. Both arms of a pair share the seed, so identical vectors
// deliver identical counts.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "netgym/models/mesh.hpp"

namespace netgym::bench {

inline const std::vector<std::uint32_t> kUniformCandidates = {3, 7, 15, 31};

struct CwPair {
  std::uint64_t seed = 0;
  std::uint64_t graded = 0;
  std::uint64_t uniform = 0;  // best over the uniform candidates
  std::uint32_t uniform_cw = 0;
};

inline CwPair compare_cw(const models::MeshConfig& config, const std::vector<std::uint32_t>& graded,
                         const std::vector<std::uint32_t>& uniform_candidates, std::uint64_t slots,
                         std::uint64_t seed) {
  CwPair p;
  p.seed = seed;
  p.graded = models::run_fixed_cw(config, graded, slots, seed);
  bool first = true;
  for (auto cw : uniform_candidates) {
    const auto d = models::run_fixed_cw(config, std::vector<std::uint32_t>(config.num_nodes, cw), slots, seed);
    if (first || d > p.uniform) {
      first = false;
      p.uniform = d;
      p.uniform_cw = cw;
    }
  }
  return p;
}

inline std::vector<CwPair> compare_cw_seeds(const models::MeshConfig& config, const std::vector<std::uint32_t>& graded,
                                            const std::vector<std::uint32_t>& uniform_candidates, std::uint64_t slots,
                                            std::uint64_t base_seed, std::uint64_t seeds) {
  std::vector<CwPair> out;
  for (std::uint64_t i = 0; i < seeds; ++i) {
    out.push_back(compare_cw(config, graded, uniform_candidates, slots, base_seed + i));
  }
  return out;
}

inline std::uint64_t graded_wins(const std::vector<CwPair>& pairs) {
  return static_cast<std::uint64_t>(
      std::count_if(pairs.begin(), pairs.end(), [](const CwPair& p) { return p.graded > p.uniform; }));
}

}  // namespace netgym::bench
