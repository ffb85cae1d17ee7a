#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace guidecap {

struct SelfCheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Built-in verification battery: finite-difference gradient checks over the
// primitives and both sequence losses, the masked-loss identities, beam
// search against exhaustive enumeration, and the guiding-word inclusion
// guarantee. Deterministic for a fixed seed. Implemented against the public
// API only, with its own finite-difference and enumeration code.
std::vector<SelfCheckResult> run_selfchecks(std::uint64_t seed);

bool all_passed(const std::vector<SelfCheckResult>& results);

}  // namespace guidecap
