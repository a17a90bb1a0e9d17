#include "bda/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bda/errors.hpp"
#include "bda/rng.hpp"

namespace bda {

namespace {

double eval(const std::function<Var()>& fn) {
  const double v = fn().value().item();
  if (!std::isfinite(v)) throw NumericError("grad_check: function value is not finite");
  return v;
}

}  // namespace

GradCheckResult grad_check(const std::function<Var()>& fn, std::vector<Var> leaves,
                           const GradCheckOptions& opt) {
  for (auto& leaf : leaves) leaf.zero_grad();
  Var out = fn();
  if (!std::isfinite(out.value().item())) {
    throw NumericError("grad_check: function value is not finite");
  }
  out.backward();

  Rng rng(opt.seed);
  GradCheckResult res;
  for (auto& leaf : leaves) {
    const Tensor analytic = leaf.has_grad() ? leaf.grad() : Tensor(leaf.shape(), 0.0);
    std::vector<std::size_t> idx(leaf.value().numel());
    std::iota(idx.begin(), idx.end(), 0);
    if (opt.max_entries_per_tensor > 0 && idx.size() > opt.max_entries_per_tensor) {
      shuffle(idx.begin(), idx.end(), rng);
      idx.resize(opt.max_entries_per_tensor);
    }
    Tensor& value = leaf.mutable_value();
    for (std::size_t i : idx) {
      const double orig = value[i];
      value[i] = orig + opt.eps;
      const double up = eval(fn);
      value[i] = orig - opt.eps;
      const double down = eval(fn);
      value[i] = orig;
      const double numeric = (up - down) / (2.0 * opt.eps);
      const double a = analytic[i];
      const double err =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      res.max_relative_error = std::max(res.max_relative_error, err);
      ++res.entries_checked;
    }
  }
  for (auto& leaf : leaves) leaf.zero_grad();
  return res;
}

}  // namespace bda
