#pragma once

#include <array>
#include <optional>
#include <span>

#include "bda/autograd.hpp"
#include "bda/mask.hpp"

namespace bda::losses {

// Focal-loss class weights for L1..L4 and the focusing exponent.
struct FocalConfig {
  std::array<double, kDamageClasses> alpha{0.6, 1.6, 1.1, 1.1};
  double gamma = 1.5;

  void validate() const;
};

struct LossWeights {
  double w_ce = 1.0;
  double w_focal = 1.0;
  double w_lovasz = 1.0;

  void validate() const;
};

// Probabilities are clamped to this floor before any logarithm.
inline constexpr double kProbFloor = 1e-12;

// Mean over non-ignored pixels of -log softmax(logits)[target]. logits is
// B x C x H x W; targets holds B masks of H x W. Returns 0 (with a warning)
// when every pixel is ignored.
Var cross_entropy(const Var& logits, std::span<const Mask> targets,
                  std::optional<int> ignore_value = std::nullopt);

// probs: B x 4 x H x W distribution over the four damage levels. Evaluates
// only pixels whose damage value is 1..4 (channel = value - 1):
//   -(1/N) sum_i alpha_c (1 - p_ic)^gamma log p_ic,   N = evaluated pixels.
// Returns 0 when no building pixel is present.
Var focal_loss(const Var& probs, std::span<const Mask> dmg,
               const FocalConfig& cfg = {});

// Lovasz-Softmax over the classes present in the (non-ignored) target,
// averaged; pixels of the whole batch are pooled.
Var lovasz_softmax(const Var& probs, std::span<const Mask> targets,
                   std::optional<int> ignore_value = std::nullopt);

struct HeadLoss {
  Var total;
  double ce = 0.0;
  double focal = 0.0;
  double lovasz = 0.0;
};

// logits: B x 5 x H x W (background + L1..L4).
//   w_ce * CE(all 5 classes) + w_focal * focal(softmax over L1..L4 channels,
//   building pixels) + w_lovasz * Lovasz(all 5 classes)
HeadLoss damage_head_loss(const Var& logits, std::span<const Mask> dmg,
                          const FocalConfig& cfg, const LossWeights& w);

// logits: B x 2 x H x W. w_ce * CE + w_lovasz * Lovasz; w_focal is ignored.
HeadLoss building_head_loss(const Var& logits, std::span<const Mask> loc,
                            const LossWeights& w);

}  // namespace bda::losses
