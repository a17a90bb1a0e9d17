#include "bda/optim.hpp"

#include <cmath>

#include "bda/errors.hpp"

namespace bda {

void adamw_step(std::span<Parameter* const> params, const AdamWConfig& cfg) {
  for (Parameter* p : params) {
    if (!p->var().has_grad()) {
      throw ContractError("adamw_step: parameter '" + p->name() + "' has no gradient");
    }
  }
  for (Parameter* p : params) {
    const Tensor& g = p->var().grad();
    Tensor& value = p->mutable_value();
    Tensor& m = p->m();
    Tensor& v = p->v();
    const long t = p->step() + 1;
    p->set_step(t);
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < value.numel(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      value[i] = value[i] - cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.eps)) -
                 cfg.lr * cfg.weight_decay * value[i];
    }
  }
}

void zero_grad(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace bda
