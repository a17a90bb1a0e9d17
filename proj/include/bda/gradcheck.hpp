#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "bda/autograd.hpp"

namespace bda {

struct GradCheckOptions {
  double eps = 1e-5;
  // 0 checks every entry; otherwise a seeded subset of this many entries per
  // tensor (large convolution weights make the exhaustive sweep slow).
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
};

// Compares reverse-mode gradients of fn() against central differences over
// the given leaves. Error per entry is |a - n| / max(1, |a|, |n|). fn must
// rebuild the graph on every call. Throws NumericError on a non-finite value.
GradCheckResult grad_check(const std::function<Var()>& fn, std::vector<Var> leaves,
                           const GradCheckOptions& opt = {});

}  // namespace bda
