#include "bda/blocks.hpp"

#include <cmath>

#include "bda/errors.hpp"
#include "bda/ops.hpp"

namespace bda {

Tensor he_uniform(Rng& rng, std::size_t cout, std::size_t cin, std::size_t k) {
  Tensor t({cout, cin, k, k});
  const double bound = std::sqrt(6.0 / static_cast<double>(cin * k * k));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

std::size_t default_groups(std::size_t channels) {
  const std::size_t g = std::min<std::size_t>(8, channels);
  return (g > 0 && channels % g == 0) ? g : 1;
}

GroupNormParams::GroupNormParams(const std::string& name, std::size_t channels)
    : gamma(name + ".gamma", Tensor({channels}, 1.0)),
      beta(name + ".beta", Tensor({channels}, 0.0)),
      groups(default_groups(channels)) {}

Var GroupNormParams::operator()(const Var& x) const {
  return ops::group_norm(x, groups, gamma.var(), beta.var());
}

std::vector<Parameter*> AttentionGateParams::parameters() {
  return {&w_x, &w_g, &b_g, &psi, &b_psi, &gn_x.gamma, &gn_x.beta, &gn_g.gamma, &gn_g.beta};
}

AttentionGateParams make_attention_gate(const std::string& name, std::size_t x_channels,
                                        std::size_t g_channels, Rng& rng) {
  if (x_channels == 0 || g_channels == 0) {
    throw ConfigError("attention gate needs non-empty inputs");
  }
  AttentionGateParams p;
  p.x_channels = x_channels;
  p.g_channels = g_channels;
  p.inter_channels = std::max<std::size_t>(1, x_channels / 2);
  const std::size_t f = p.inter_channels;
  p.w_x = Parameter(name + ".w_x", he_uniform(rng, f, x_channels, 1));
  p.w_g = Parameter(name + ".w_g", he_uniform(rng, f, g_channels, 1));
  p.b_g = Parameter(name + ".b_g", Tensor({f}, 0.0));
  p.psi = Parameter(name + ".psi", he_uniform(rng, 1, f, 1));
  p.b_psi = Parameter(name + ".b_psi", Tensor({1}, 0.0));
  p.gn_x = GroupNormParams(name + ".gn_x", f);
  p.gn_g = GroupNormParams(name + ".gn_g", f);
  return p;
}

GateOutput attention_gate(const Var& x, const Var& g, const AttentionGateParams& p) {
  x.value().require_rank4("attention_gate x");
  g.value().require_rank4("attention_gate g");
  if (x.shape()[1] != p.x_channels || g.shape()[1] != p.g_channels) {
    throw ConfigError("attention_gate: expected " + std::to_string(p.x_channels) + "/" +
                      std::to_string(p.g_channels) + " channels, got " +
                      shape_str(x.shape()) + " and " + shape_str(g.shape()));
  }
  if (g.shape()[0] != x.shape()[0] || g.shape()[2] > x.shape()[2] ||
      g.shape()[3] > x.shape()[3]) {
    throw ContractError("attention_gate: gating signal must not exceed the skip size");
  }
  const Var g_up = ops::upsample_bilinear(g, x.shape()[2], x.shape()[3]);
  const Var theta = p.gn_x(ops::conv2d(x, p.w_x.var(), Var()));
  const Var phi = p.gn_g(ops::conv2d(g_up, p.w_g.var(), p.b_g.var()));
  const Var act = ops::relu(ops::add(theta, phi));
  const Var alpha = ops::sigmoid(ops::conv2d(act, p.psi.var(), p.b_psi.var()));
  const Var mult = ops::affine(alpha, 0.5, 0.5);
  return {ops::mul_channel_broadcast(x, mult), alpha};
}

std::vector<Parameter*> AlignmentModuleParams::parameters() {
  return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &conv3_w, &conv3_b};
}

AlignmentModuleParams make_alignment_module(const std::string& name, std::size_t channels,
                                            Rng& rng) {
  if (channels == 0) throw ConfigError("alignment module needs non-empty features");
  AlignmentModuleParams p;
  p.channels = channels;
  p.hidden = channels;
  const std::size_t h = p.hidden;
  p.conv1_w = Parameter(name + ".conv1.w", he_uniform(rng, h, 2 * channels, 3));
  p.conv1_b = Parameter(name + ".conv1.b", Tensor({h}, 0.0));
  p.conv2_w = Parameter(name + ".conv2.w", he_uniform(rng, h, h, 3));
  p.conv2_b = Parameter(name + ".conv2.b", Tensor({h}, 0.0));
  p.conv3_w = Parameter(name + ".conv3.w", Tensor({2, h, 3, 3}, 0.0));
  p.conv3_b = Parameter(name + ".conv3.b", Tensor({2}, 0.0));
  return p;
}

Var warp_features(const Var& f, const Var& flow) {
  f.value().require_rank4("warp_features feature");
  flow.value().require_rank4("warp_features flow");
  const std::size_t n = f.shape()[0], h = f.shape()[2], w = f.shape()[3];
  if (flow.shape() != Shape{n, 2, h, w}) {
    throw ContractError("warp_features: flow shape " + shape_str(flow.shape()) +
                        " does not match feature " + shape_str(f.shape()));
  }
  Tensor gx({n, 1, h, w}), gy({n, 1, h, w});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        gx.at(b, 0, y, x) = static_cast<double>(x);
        gy.at(b, 0, y, x) = static_cast<double>(y);
      }
    }
  }
  const Var xs = ops::add(Var::constant(std::move(gx)), ops::slice_channels(flow, 0, 1));
  const Var ys = ops::add(Var::constant(std::move(gy)), ops::slice_channels(flow, 1, 2));
  return ops::bilinear_sample(f, xs, ys);
}

AlignmentOutput alignment_forward(const Var& f_pre, const Var& f_post,
                                  const AlignmentModuleParams& p) {
  if (f_pre.shape() != f_post.shape()) {
    throw ContractError("alignment_forward: pre/post features differ: " +
                        shape_str(f_pre.shape()) + " vs " + shape_str(f_post.shape()));
  }
  f_pre.value().require_rank4("alignment_forward");
  if (f_pre.shape()[1] != p.channels) {
    throw ContractError("alignment_forward: module built for " +
                        std::to_string(p.channels) + " channels, got " +
                        shape_str(f_pre.shape()));
  }
  Var h = ops::concat_channels({f_pre, f_post});
  h = ops::relu(ops::conv2d(h, p.conv1_w.var(), p.conv1_b.var()));
  h = ops::relu(ops::conv2d(h, p.conv2_w.var(), p.conv2_b.var()));
  Var flow = ops::conv2d(h, p.conv3_w.var(), p.conv3_b.var());
  return {flow, warp_features(f_pre, flow)};
}

}  // namespace bda
