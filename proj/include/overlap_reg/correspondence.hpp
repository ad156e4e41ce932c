#pragma once

#include <cstddef>
#include <unordered_set>
#include <vector>

#include "overlap_reg/error.hpp"

namespace overlap_reg {

// One matched pair. Weight is the product of every downweighting stage that
// touched the pair (robust kernel, trimming survival, overlap weight) and
// stays in [0, 1].
struct Correspondence {
  std::size_t source_index = 0;
  std::size_t target_index = 0;
  double weight = 1.0;
  double squared_distance = 0.0;  // m^2, at match time
};

using CorrespondenceSet = std::vector<Correspondence>;

// Invariant check; meant for tests and external input, not the inner loop.
inline void validate(const CorrespondenceSet& corr, std::size_t source_size,
                     std::size_t target_size) {
  std::unordered_set<std::size_t> seen;
  seen.reserve(corr.size());
  for (const Correspondence& p : corr) {
    if (p.source_index >= source_size || p.target_index >= target_size) {
      fail(ErrorCode::invalid_argument, "correspondence index out of range");
    }
    if (!(p.weight >= 0.0 && p.weight <= 1.0)) {
      fail(ErrorCode::invalid_argument, "correspondence weight outside [0, 1]");
    }
    if (!(p.squared_distance >= 0.0)) {
      fail(ErrorCode::invalid_argument, "correspondence with negative squared distance");
    }
    if (!seen.insert(p.source_index).second) {
      fail(ErrorCode::invalid_argument, "duplicate source index in correspondence set");
    }
  }
}

}  // namespace overlap_reg
