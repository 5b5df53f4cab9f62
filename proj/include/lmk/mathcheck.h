#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lmk {

struct MathCheck {
  std::string name;
  bool passed = false;
  double worst = 0.0;      // worst observed error for the check
  double tolerance = 0.0;  // bound the check was held to
};

// Property and finite-difference checks of the pooling and margin-loss
// numerics over `instances` random cases.
std::vector<MathCheck> run_math_checks(std::uint64_t seed, int instances = 100);

}  // namespace lmk
