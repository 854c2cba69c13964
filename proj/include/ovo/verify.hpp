#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ovo {

struct GradBatteryReport {
  bool passed = false;
  int seeds = 0;
  double max_rel_error = 0.0;
  std::vector<std::string> failures;  // one line per failing check
};

/// Seeded finite-difference verification of every alignment loss: vox-pix,
/// vox-text, fused pix-pix, and the weighted composite, each on a fresh
/// random configuration per seed.
GradBatteryReport run_gradient_battery(int seed_count, double tol, double h);

/// Detector sanity: a deliberately corrupted analytic gradient (one entry
/// doubled) must be flagged at exactly that entry.
bool run_detector_self_test();

}  // namespace ovo
