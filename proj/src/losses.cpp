#include "bda/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "bda/errors.hpp"
#include "bda/log.hpp"
#include "bda/ops.hpp"

namespace bda::losses {

namespace {

struct Layout {
  std::size_t n, c, h, w;
};

Layout check_layout(const Var& t, std::span<const Mask> targets, const char* what) {
  t.value().require_rank4(what);
  Layout l{t.shape()[0], t.shape()[1], t.shape()[2], t.shape()[3]};
  if (targets.size() != l.n) {
    throw ContractError(std::string(what) + ": " + std::to_string(targets.size()) +
                        " targets for a batch of " + std::to_string(l.n));
  }
  for (const Mask& m : targets) {
    if (m.height != l.h || m.width != l.w) {
      throw ContractError(std::string(what) + ": target size does not match " +
                          shape_str(t.shape()));
    }
  }
  return l;
}

bool ignored(std::uint8_t v, std::optional<int> ignore_value) {
  return ignore_value && static_cast<int>(v) == *ignore_value;
}

// dL/dp_i for one class of the Lovasz extension: errors sorted descending,
// weights are successive differences of the Jaccard loss along that order.
double lovasz_class(const std::vector<double>& errors, const std::vector<char>& fg,
                    std::vector<double>& grad_errors) {
  const std::size_t p = errors.size();
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return errors[a] > errors[b]; });
  double gts = 0.0;
  for (char f : fg) gts += f;
  double cum_fg = 0.0, cum_bg = 0.0, prev_jacc = 0.0, loss = 0.0;
  grad_errors.assign(p, 0.0);
  for (std::size_t k = 0; k < p; ++k) {
    const std::size_t i = order[k];
    if (fg[i]) {
      cum_fg += 1.0;
    } else {
      cum_bg += 1.0;
    }
    const double inter = gts - cum_fg;
    const double uni = gts + cum_bg;
    const double jacc = 1.0 - inter / uni;
    const double wgt = jacc - prev_jacc;
    prev_jacc = jacc;
    loss += errors[i] * wgt;
    grad_errors[i] = wgt;
  }
  return loss;
}

}  // namespace

void FocalConfig::validate() const {
  for (double a : alpha) {
    if (!(a > 0.0)) throw ConfigError("focal alpha entries must be positive");
  }
  if (!(gamma >= 0.0)) throw ConfigError("focal gamma must be non-negative");
}

void LossWeights::validate() const {
  if (w_ce < 0.0 || w_focal < 0.0 || w_lovasz < 0.0) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (w_ce == 0.0 && w_focal == 0.0 && w_lovasz == 0.0) {
    throw ConfigError("at least one loss weight must be positive");
  }
}

Var cross_entropy(const Var& logits, std::span<const Mask> targets,
                  std::optional<int> ignore_value) {
  const auto [n, c, h, w] = check_layout(logits, targets, "cross_entropy");
  const std::size_t hw = h * w;
  const auto& x = logits.value();
  // Softmax probabilities are kept for the backward pass.
  auto probs = std::make_shared<std::vector<double>>(x.numel(), 0.0);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t p = 0; p < hw; ++p) {
      const std::uint8_t t = targets[b].values[p];
      if (ignored(t, ignore_value)) continue;
      if (t >= c) {
        throw ContractError("cross_entropy: target value " + std::to_string(t) +
                            " outside " + std::to_string(c) + " classes");
      }
      const std::size_t base = b * c * hw + p;
      double mx = x[base];
      for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, x[base + k * hw]);
      double z = 0.0;
      for (std::size_t k = 0; k < c; ++k) z += std::exp(x[base + k * hw] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t k = 0; k < c; ++k) {
        (*probs)[base + k * hw] = std::exp(x[base + k * hw] - lse);
      }
      total += lse - x[base + t * hw];
      ++count;
    }
  }
  if (count == 0) {
    log_warning("cross_entropy: every pixel is ignored; loss defined as 0");
    return Var::make(Tensor::scalar(0.0), {logits}, [](detail::Node&) {});
  }
  const double inv = 1.0 / static_cast<double>(count);
  std::vector<Mask> tg(targets.begin(), targets.end());
  return Var::make(Tensor::scalar(total * inv), {logits},
                   [=, tg = std::move(tg)](detail::Node& node) {
    Tensor& g = node.inputs[0]->grad_buffer();
    const double s = node.grad[0] * inv;
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t p = 0; p < hw; ++p) {
        const std::uint8_t t = tg[b].values[p];
        if (ignored(t, ignore_value)) continue;
        const std::size_t base = b * c * hw + p;
        for (std::size_t k = 0; k < c; ++k) {
          const double onehot = (k == t) ? 1.0 : 0.0;
          g[base + k * hw] += s * ((*probs)[base + k * hw] - onehot);
        }
      }
    }
  });
}

Var focal_loss(const Var& probs, std::span<const Mask> dmg, const FocalConfig& cfg) {
  const auto [n, c, h, w] = check_layout(probs, dmg, "focal_loss");
  if (c != kDamageClasses) {
    throw ContractError("focal_loss: expects 4 damage-class channels, got " +
                        std::to_string(c));
  }
  const std::size_t hw = h * w;
  const auto& pv = probs.value();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t p = 0; p < hw; ++p) {
      const std::uint8_t t = dmg[b].values[p];
      if (t == 0) continue;
      if (t > kMaxDamageValue) throw ContractError("focal_loss: damage value out of range");
      const double pt = std::max(pv[(b * c + (t - 1)) * hw + p], kProbFloor);
      total += -cfg.alpha[t - 1] * std::pow(1.0 - pt, cfg.gamma) * std::log(pt);
      ++count;
    }
  }
  if (count == 0) {
    return Var::make(Tensor::scalar(0.0), {probs}, [](detail::Node&) {});
  }
  const double inv = 1.0 / static_cast<double>(count);
  std::vector<Mask> tg(dmg.begin(), dmg.end());
  return Var::make(Tensor::scalar(total * inv), {probs},
                   [=, tg = std::move(tg)](detail::Node& node) {
    Tensor& g = node.inputs[0]->grad_buffer();
    const Tensor& pv = node.inputs[0]->value;
    const double s = node.grad[0] * inv;
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t p = 0; p < hw; ++p) {
        const std::uint8_t t = tg[b].values[p];
        if (t == 0) continue;
        const std::size_t i = (b * c + (t - 1)) * hw + p;
        const double raw = pv[i];
        if (raw < kProbFloor) continue;  // clamped: locally constant
        const double a = cfg.alpha[t - 1];
        const double q = 1.0 - raw;
        // d/dp [ -a q^g log p ] = a g q^(g-1) log p - a q^g / p
        double d = -a * std::pow(q, cfg.gamma) / raw;
        if (cfg.gamma != 0.0 && q > 0.0) {
          d += a * cfg.gamma * std::pow(q, cfg.gamma - 1.0) * std::log(raw);
        }
        g[i] += s * d;
      }
    }
  });
}

Var lovasz_softmax(const Var& probs, std::span<const Mask> targets,
                   std::optional<int> ignore_value) {
  const auto [n, c, h, w] = check_layout(probs, targets, "lovasz_softmax");
  const std::size_t hw = h * w;
  const auto& pv = probs.value();
  // Flattened indices of the evaluated pixels (batch-major).
  std::vector<std::size_t> pix;
  std::vector<std::uint8_t> labels;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t p = 0; p < hw; ++p) {
      const std::uint8_t t = targets[b].values[p];
      if (ignored(t, ignore_value)) continue;
      if (t >= c) throw ContractError("lovasz_softmax: target value out of range");
      pix.push_back(b * c * hw + p);
      labels.push_back(t);
    }
  }
  if (pix.empty()) {
    log_warning("lovasz_softmax: no pixels to evaluate; loss defined as 0");
    return Var::make(Tensor::scalar(0.0), {probs}, [](detail::Node&) {});
  }
  // Per-present-class gradient of the loss w.r.t. the class probability.
  auto grads = std::make_shared<std::vector<std::pair<std::size_t, std::vector<double>>>>();
  double total = 0.0;
  std::size_t present = 0;
  std::vector<double> errors(pix.size()), gerr;
  std::vector<char> fg(pix.size());
  for (std::size_t k = 0; k < c; ++k) {
    bool any = false;
    for (std::size_t i = 0; i < pix.size(); ++i) {
      fg[i] = labels[i] == k;
      any |= fg[i] != 0;
    }
    if (!any) continue;
    for (std::size_t i = 0; i < pix.size(); ++i) {
      errors[i] = std::abs((fg[i] ? 1.0 : 0.0) - pv[pix[i] + k * hw]);
    }
    total += lovasz_class(errors, fg, gerr);
    // d error / d p = -1 for foreground pixels, +1 otherwise.
    for (std::size_t i = 0; i < pix.size(); ++i) {
      if (fg[i]) gerr[i] = -gerr[i];
    }
    grads->emplace_back(k, gerr);
    ++present;
  }
  const double inv = 1.0 / static_cast<double>(present);
  auto pix_ptr = std::make_shared<std::vector<std::size_t>>(std::move(pix));
  return Var::make(Tensor::scalar(total * inv), {probs},
                   [=](detail::Node& node) {
    Tensor& g = node.inputs[0]->grad_buffer();
    const double s = node.grad[0] * inv;
    for (const auto& [k, ge] : *grads) {
      for (std::size_t i = 0; i < pix_ptr->size(); ++i) {
        g[(*pix_ptr)[i] + k * hw] += s * ge[i];
      }
    }
  });
}

HeadLoss damage_head_loss(const Var& logits, std::span<const Mask> dmg,
                          const FocalConfig& cfg, const LossWeights& w) {
  if (logits.value().rank() != 4 || logits.shape()[1] != kDamageClasses + 1) {
    throw ContractError("damage_head_loss: expects B x 5 x H x W logits, got " +
                        shape_str(logits.shape()));
  }
  HeadLoss out;
  std::vector<Var> terms;
  std::vector<double> weights;
  if (w.w_ce > 0.0) {
    Var ce = cross_entropy(logits, dmg);
    out.ce = ce.value().item();
    terms.push_back(ce);
    weights.push_back(w.w_ce);
  }
  if (w.w_focal > 0.0) {
    // Renormalizing the 5-way softmax over L1..L4 equals a softmax of those
    // four logits.
    Var probs = ops::softmax_channels(ops::slice_channels(logits, 1, kDamageClasses + 1));
    Var fl = focal_loss(probs, dmg, cfg);
    out.focal = fl.value().item();
    terms.push_back(fl);
    weights.push_back(w.w_focal);
  }
  if (w.w_lovasz > 0.0) {
    Var lv = lovasz_softmax(ops::softmax_channels(logits), dmg);
    out.lovasz = lv.value().item();
    terms.push_back(lv);
    weights.push_back(w.w_lovasz);
  }
  if (terms.empty()) throw ConfigError("damage_head_loss: all loss weights are zero");
  Var total = ops::affine(terms[0], weights[0], 0.0);
  for (std::size_t i = 1; i < terms.size(); ++i) {
    total = ops::add(total, ops::affine(terms[i], weights[i], 0.0));
  }
  out.total = total;
  return out;
}

HeadLoss building_head_loss(const Var& logits, std::span<const Mask> loc,
                            const LossWeights& w) {
  if (logits.value().rank() != 4 || logits.shape()[1] != 2) {
    throw ContractError("building_head_loss: expects B x 2 x H x W logits, got " +
                        shape_str(logits.shape()));
  }
  HeadLoss out;
  std::vector<Var> terms;
  std::vector<double> weights;
  if (w.w_ce > 0.0) {
    Var ce = cross_entropy(logits, loc);
    out.ce = ce.value().item();
    terms.push_back(ce);
    weights.push_back(w.w_ce);
  }
  if (w.w_lovasz > 0.0) {
    Var lv = lovasz_softmax(ops::softmax_channels(logits), loc);
    out.lovasz = lv.value().item();
    terms.push_back(lv);
    weights.push_back(w.w_lovasz);
  }
  if (terms.empty()) throw ConfigError("building_head_loss: w_ce and w_lovasz are both zero");
  Var total = ops::affine(terms[0], weights[0], 0.0);
  for (std::size_t i = 1; i < terms.size(); ++i) {
    total = ops::add(total, ops::affine(terms[i], weights[i], 0.0));
  }
  out.total = total;
  return out;
}

}  // namespace bda::losses
