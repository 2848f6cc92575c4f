#pragma once

#include <vector>

namespace copycat {

// Post-softmax class probabilities: entries in [0,1], sum 1 within 1e-6.
struct SoftLabel {
  std::vector<float> probabilities;
};

struct HardLabel {
  int class_index = 0;
  std::vector<float> one_hot;
};

// Argmax with lowest-index tie break. Throws ValidationError if the vector
// is empty, has entries outside [0,1], or does not sum to 1 within 1e-6.
HardLabel harden(const SoftLabel& soft);

}  // namespace copycat
