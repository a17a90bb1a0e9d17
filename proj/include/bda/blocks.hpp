#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bda/autograd.hpp"
#include "bda/rng.hpp"

namespace bda {

// Uniform He initialization, bound sqrt(6 / fan_in).
Tensor he_uniform(Rng& rng, std::size_t cout, std::size_t cin, std::size_t k);

// Group count used by every normalization layer: min(8, channels), falling
// back to 1 when that does not divide the channel count.
std::size_t default_groups(std::size_t channels);

struct GroupNormParams {
  Parameter gamma;
  Parameter beta;
  std::size_t groups = 1;

  GroupNormParams() = default;
  GroupNormParams(const std::string& name, std::size_t channels);
  Var operator()(const Var& x) const;
};

// Additive attention gate on a skip connection with a 0.5 retention floor:
//   alpha = sigmoid(psi(relu(GN(W_x x) + GN(W_g up(g) + b_g))) + b_psi)
//   x_hat = (0.5 + 0.5 alpha) * x
// W_x carries no bias; b_g sits on the gating branch, b_psi on psi.
struct AttentionGateParams {
  std::size_t x_channels = 0;
  std::size_t g_channels = 0;
  std::size_t inter_channels = 0;
  Parameter w_x;    // F x Cx x 1 x 1
  Parameter w_g;    // F x Cg x 1 x 1
  Parameter b_g;    // F
  Parameter psi;    // 1 x F x 1 x 1
  Parameter b_psi;  // 1
  GroupNormParams gn_x;
  GroupNormParams gn_g;

  std::vector<Parameter*> parameters();
};

// inter_channels = max(1, x_channels / 2).
AttentionGateParams make_attention_gate(const std::string& name, std::size_t x_channels,
                                        std::size_t g_channels, Rng& rng);

struct GateOutput {
  Var gated;  // x_hat, same shape as x
  Var alpha;  // N x 1 x H x W, in [0, 1]
};

// g may be coarser than x; it is bilinearly upsampled to x's spatial size.
GateOutput attention_gate(const Var& x, const Var& g, const AttentionGateParams& p);

// Shallow flow predictor: three 3x3 convolutions with ReLU between them,
// input is concat(f_pre, f_post) (2c channels), output is a 2-channel offset
// map (channel 0 horizontal, channel 1 vertical, in pixels of that stage).
struct AlignmentModuleParams {
  std::size_t channels = 0;
  std::size_t hidden = 0;
  Parameter conv1_w, conv1_b;  // hidden x 2c x 3 x 3
  Parameter conv2_w, conv2_b;  // hidden x hidden x 3 x 3
  Parameter conv3_w, conv3_b;  // 2 x hidden x 3 x 3, zero at construction

  std::vector<Parameter*> parameters();
};

// hidden = channels. The last convolution starts at zero, so the initial
// flow is identically zero.
AlignmentModuleParams make_alignment_module(const std::string& name, std::size_t channels,
                                            Rng& rng);

struct AlignmentOutput {
  Var flow;        // N x 2 x H x W
  Var warped_pre;  // N x c x H x W
};

AlignmentOutput alignment_forward(const Var& f_pre, const Var& f_post,
                                  const AlignmentModuleParams& p);

// out[n, c, y, x] = f sampled at (x + flow[n,0,y,x], y + flow[n,1,y,x]) with
// border clamping: the flow points from the target grid into f.
Var warp_features(const Var& f, const Var& flow);

}  // namespace bda
