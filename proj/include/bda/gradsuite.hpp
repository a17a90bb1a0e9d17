#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bda {

struct GradSuiteEntry {
  std::string component;
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
  // Pass threshold: tighter for ops that are linear in the checked inputs.
  double tolerance = 1e-4;
  double seconds = 0.0;

  bool passed() const { return max_relative_error < tolerance; }
};

// Central-difference checks of every differentiable building block and of a
// full FOCAL + ALIGN + AGBD forward + loss at 16 x 16 on a narrow network.
std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed = 1);

}  // namespace bda
