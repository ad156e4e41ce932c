#pragma once

#include <cstddef>
#include <vector>

#include "overlap_reg/transform.hpp"

namespace overlap_reg {

struct IterationRecord {
  RigidTransform transform;         // estimate after this iteration's alignment
  double objective = 0.0;           // registrar-specific; see the producing module
  std::size_t effective_pairs = 0;  // pairs with positive final weight
};

// Shared result shape of every base registrar (ICP family and GMM).
struct RegistrationResult {
  RigidTransform transform;
  int iterations = 0;
  bool converged = false;
  double final_rmsd = 0.0;  // m, weighted RMS residual at the last iteration
  std::vector<IterationRecord> trace;
};

}  // namespace overlap_reg
