#pragma once

#include <span>

#include "bda/autograd.hpp"

namespace bda {

// Decoupled weight decay Adam. lr and weight_decay default to the training
// recipe (1e-4, 5e-3); betas and eps are the usual Adam defaults.
struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-3;
};

// One update of every parameter from its accumulated gradient:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2,  t <- t + 1
//   value <- value - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * value
// Throws ContractError if a parameter has no gradient.
void adamw_step(std::span<Parameter* const> params, const AdamWConfig& cfg);

void zero_grad(std::span<Parameter* const> params);

}  // namespace bda
