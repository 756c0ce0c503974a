#pragma once

#include <string>
#include <vector>

namespace evikit {

struct SelfcheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Embedded golden vectors: metric constants, boundary conventions and
/// trivially forced values from every module.
std::vector<SelfcheckResult> run_selfcheck();

} // namespace evikit
