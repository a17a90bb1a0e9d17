#pragma once

#include <cstddef>
#include <vector>

#include "bda/autograd.hpp"

// Differentiable primitives over N x C x H x W tensors.
//
// Interpolation convention (shared by upsample_bilinear and bilinear_sample):
// continuous coordinates are expressed in pixel-index units, so the center of
// pixel (x, y) sits at coordinate (x, y). Resizing maps output index d to the
// source coordinate (d + 0.5) * in / out - 0.5, i.e. pixel centers are aligned
// (half-pixel centers, corners not aligned). Coordinates outside the valid
// range are clamped to the border.
namespace bda::ops {

// kernel size is taken from the weight (Cout x Cin x K x K, K in {1, 3});
// padding is K / 2. stride is 1 or 2. bias may be an undefined Var.
Var conv2d(const Var& input, const Var& weight, const Var& bias, int stride = 1);

Var group_norm(const Var& input, std::size_t groups, const Var& gamma,
               const Var& beta, double eps = 1e-5);

Var relu(const Var& x);
Var sigmoid(const Var& x);
Var softmax_channels(const Var& x);

Var upsample_bilinear(const Var& x, std::size_t target_h, std::size_t target_w);

// xs, ys: N x 1 x Ho x Wo sampling coordinates into feature (N x C x H x W).
// Output is N x C x Ho x Wo.
Var bilinear_sample(const Var& feature, const Var& xs, const Var& ys);

Var concat_channels(const std::vector<Var>& parts);
Var slice_channels(const Var& x, std::size_t begin, std::size_t end);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
// x: N x C x H x W, m: N x 1 x H x W.
Var mul_channel_broadcast(const Var& x, const Var& m);
// a * x + b elementwise with scalar constants.
Var affine(const Var& x, double a, double b);
Var sum(const Var& x);
Var mean(const Var& x);

// Index of the largest channel per pixel, first wins on ties. Not differentiable.
std::vector<std::uint8_t> argmax_channels(const Tensor& x);

}  // namespace bda::ops
