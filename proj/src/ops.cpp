#include "bda/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>

#include "bda/errors.hpp"

namespace bda::ops {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

// Grad buffer of input i, or nullptr when that input needs no gradient.
Tensor* input_grad(detail::Node& n, std::size_t i) {
  auto& in = n.inputs.at(i);
  return in->requires_grad ? &in->grad_buffer() : nullptr;
}

void require_same_shape(const Var& a, const Var& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ContractError(std::string(what) + ": shape mismatch " +
                        shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

struct Dims {
  std::size_t n, c, h, w;
};

Dims dims4(const Tensor& t, const char* what) {
  t.require_rank4(what);
  return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

// Unfolds one image (C x H x W) into a (C*K*K) x (Ho*Wo) patch matrix.
void im2col(const double* img, std::size_t c, std::size_t h, std::size_t w,
            std::size_t k, std::size_t stride, std::size_t ho, std::size_t wo,
            double* col) {
  const long pad = static_cast<long>(k / 2);
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* row = col + ((ci * k + ky) * k + kx) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long iy = static_cast<long>(oy * stride + ky) - pad;
          double* dst = row + oy * wo;
          if (iy < 0 || iy >= static_cast<long>(h)) {
            std::fill(dst, dst + wo, 0.0);
            continue;
          }
          const double* src = img + (ci * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long ix = static_cast<long>(ox * stride + kx) - pad;
            dst[ox] = (ix < 0 || ix >= static_cast<long>(w)) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void col2im(const double* col, std::size_t c, std::size_t h, std::size_t w,
            std::size_t k, std::size_t stride, std::size_t ho, std::size_t wo,
            double* img) {
  const long pad = static_cast<long>(k / 2);
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* row = col + ((ci * k + ky) * k + kx) * ho * wo;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long iy = static_cast<long>(oy * stride + ky) - pad;
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          double* dst = img + (ci * h + static_cast<std::size_t>(iy)) * w;
          const double* src = row + oy * wo;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long ix = static_cast<long>(ox * stride + kx) - pad;
            if (ix >= 0 && ix < static_cast<long>(w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// Source taps for one axis of a half-pixel-center resize.
struct Taps {
  std::vector<std::size_t> lo, hi;
  std::vector<double> frac;
};

Taps resize_taps(std::size_t in, std::size_t out) {
  Taps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  const double max_coord = static_cast<double>(in - 1);
  for (std::size_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, max_coord);
    auto lo = static_cast<std::size_t>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    t.lo[d] = lo;
    t.hi[d] = std::min(lo + 1, in - 1);
    t.frac[d] = src - static_cast<double>(lo);
  }
  return t;
}

// Clamped coordinate and its lower tap. Returns whether the clamp is inactive
// (coordinate gradient passes through).
struct Tap {
  std::size_t lo, hi;
  double frac;
  bool interior;
};

Tap sample_tap(double coord, std::size_t extent) {
  const double max_coord = static_cast<double>(extent - 1);
  Tap t{};
  t.interior = coord >= 0.0 && coord <= max_coord;
  const double c = std::clamp(coord, 0.0, max_coord);
  auto lo = static_cast<std::size_t>(std::floor(c));
  // Keep lo one below the last index so the border sample still has an
  // inward-facing slope.
  if (extent >= 2 && lo >= extent - 1) lo = extent - 2;
  if (extent < 2) lo = 0;
  t.lo = lo;
  t.hi = std::min(lo + 1, extent - 1);
  t.frac = c - static_cast<double>(lo);
  return t;
}

}  // namespace

Var conv2d(const Var& input, const Var& weight, const Var& bias, int stride) {
  const auto [n, cin, h, w] = dims4(input.value(), "conv2d input");
  weight.value().require_rank4("conv2d weight");
  const std::size_t cout = weight.shape()[0];
  const std::size_t k = weight.shape()[2];
  if (weight.shape()[1] != cin) {
    throw ContractError("conv2d: input has " + std::to_string(cin) +
                        " channels, weight expects " +
                        std::to_string(weight.shape()[1]));
  }
  if (weight.shape()[3] != k || (k != 1 && k != 3)) {
    throw ContractError("conv2d: kernel must be 1x1 or 3x3, got " +
                        shape_str(weight.shape()));
  }
  if (stride != 1 && stride != 2) {
    throw ContractError("conv2d: stride must be 1 or 2");
  }
  if (bias.defined() && bias.shape() != Shape{cout}) {
    throw ContractError("conv2d: bias shape " + shape_str(bias.shape()) +
                        " does not match " + std::to_string(cout) + " outputs");
  }
  const auto s = static_cast<std::size_t>(stride);
  const std::size_t pad = k / 2;
  const std::size_t ho = (h + 2 * pad - k) / s + 1;
  const std::size_t wo = (w + 2 * pad - k) / s + 1;
  const std::size_t patch = cin * k * k;
  const std::size_t hw = ho * wo;
  const bool direct = (k == 1 && s == 1);

  Tensor out({n, cout, ho, wo});
  // Patch matrices are kept for the weight gradient.
  auto cols = std::make_shared<std::vector<double>>(direct ? 0 : n * patch * hw);
  CMapR wmat(weight.value().data().data(), cout, patch);
  for (std::size_t b = 0; b < n; ++b) {
    const double* img = input.value().data().data() + b * cin * h * w;
    const double* col = img;
    if (!direct) {
      double* dst = cols->data() + b * patch * hw;
      im2col(img, cin, h, w, k, s, ho, wo, dst);
      col = dst;
    }
    MapR omat(out.data().data() + b * cout * hw, cout, hw);
    omat.noalias() = wmat * CMapR(col, patch, hw);
    if (bias.defined()) {
      for (std::size_t co = 0; co < cout; ++co) {
        omat.row(co).array() += bias.value()[co];
      }
    }
  }

  std::vector<Var> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  const bool has_bias = bias.defined();
  return Var::make(std::move(out), std::move(inputs),
                   [=](detail::Node& node) {
    const Tensor& gout = node.grad;
    Tensor* gin = input_grad(node, 0);
    Tensor* gw = input_grad(node, 1);
    Tensor* gb = has_bias ? input_grad(node, 2) : nullptr;
    const Tensor& wval = node.inputs[1]->value;
    const Tensor& xval = node.inputs[0]->value;
    CMapR wm(wval.data().data(), cout, patch);
    std::vector<double> dcol(direct ? 0 : patch * hw);
    for (std::size_t b = 0; b < n; ++b) {
      CMapR go(gout.data().data() + b * cout * hw, cout, hw);
      if (gw) {
        const double* col = direct ? xval.data().data() + b * cin * h * w
                                   : cols->data() + b * patch * hw;
        MapR(gw->data().data(), cout, patch).noalias() +=
            go * CMapR(col, patch, hw).transpose();
      }
      if (gb) {
        for (std::size_t co = 0; co < cout; ++co) (*gb)[co] += go.row(co).sum();
      }
      if (gin) {
        double* gimg = gin->data().data() + b * cin * h * w;
        if (direct) {
          MapR(gimg, cin, hw).noalias() += wm.transpose() * go;
        } else {
          MapR(dcol.data(), patch, hw).noalias() = wm.transpose() * go;
          col2im(dcol.data(), cin, h, w, k, s, ho, wo, gimg);
        }
      }
    }
  });
}

Var group_norm(const Var& input, std::size_t groups, const Var& gamma,
               const Var& beta, double eps) {
  const auto [n, c, h, w] = dims4(input.value(), "group_norm input");
  if (groups == 0 || c % groups != 0) {
    throw ConfigError("group_norm: " + std::to_string(c) +
                      " channels not divisible into " + std::to_string(groups) +
                      " groups");
  }
  if (!(eps > 0.0)) throw ConfigError("group_norm: eps must be positive");
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
    throw ContractError("group_norm: affine parameters must have shape [" +
                        std::to_string(c) + "]");
  }
  const std::size_t cpg = c / groups;
  const std::size_t hw = h * w;
  const std::size_t m = cpg * hw;
  const auto& x = input.value();
  auto xhat = std::make_shared<Tensor>(input.shape());
  auto inv_std = std::make_shared<std::vector<double>>(n * groups);
  Tensor out(input.shape());
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t off = (b * c + g * cpg) * hw;
      double mu = 0.0;
      for (std::size_t i = 0; i < m; ++i) mu += x[off + i];
      mu /= static_cast<double>(m);
      double var = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double d = x[off + i] - mu;
        var += d * d;
      }
      var /= static_cast<double>(m);
      const double is = 1.0 / std::sqrt(var + eps);
      (*inv_std)[b * groups + g] = is;
      for (std::size_t i = 0; i < m; ++i) {
        const double xh = (x[off + i] - mu) * is;
        const std::size_t ch = g * cpg + i / hw;
        (*xhat)[off + i] = xh;
        out[off + i] = xh * gamma.value()[ch] + beta.value()[ch];
      }
    }
  }
  return Var::make(std::move(out), {input, gamma, beta},
                   [=](detail::Node& node) {
    const Tensor& gy = node.grad;
    Tensor* gx = input_grad(node, 0);
    Tensor* gg = input_grad(node, 1);
    Tensor* gbeta = input_grad(node, 2);
    const Tensor& gam = node.inputs[1]->value;
    std::vector<double> dxh(m);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t g = 0; g < groups; ++g) {
        const std::size_t off = (b * c + g * cpg) * hw;
        double sum_d = 0.0, sum_dx = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const std::size_t ch = g * cpg + i / hw;
          const double gyi = gy[off + i];
          const double xh = (*xhat)[off + i];
          if (gg) (*gg)[ch] += gyi * xh;
          if (gbeta) (*gbeta)[ch] += gyi;
          dxh[i] = gyi * gam[ch];
          sum_d += dxh[i];
          sum_dx += dxh[i] * xh;
        }
        if (!gx) continue;
        const double is = (*inv_std)[b * groups + g];
        const double inv_m = 1.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
          (*gx)[off + i] +=
              is * (dxh[i] - inv_m * sum_d - (*xhat)[off + i] * inv_m * sum_dx);
        }
      }
    }
  });
}

Var relu(const Var& x) {
  Tensor out(x.shape());
  const auto& xv = x.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return Var::make(std::move(out), {x}, [](detail::Node& node) {
    Tensor* gx = input_grad(node, 0);
    const Tensor& xv = node.inputs[0]->value;
    for (std::size_t i = 0; i < xv.numel(); ++i) {
      if (xv[i] > 0.0) (*gx)[i] += node.grad[i];
    }
  });
}

Var sigmoid(const Var& x) {
  Tensor out(x.shape());
  const auto& xv = x.value();
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const double v = xv[i];
    // Branching keeps exp() from overflowing for large |v|.
    if (v >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  return Var::make(out, {x}, [out](detail::Node& node) {
    Tensor* gx = input_grad(node, 0);
    for (std::size_t i = 0; i < out.numel(); ++i) {
      (*gx)[i] += node.grad[i] * out[i] * (1.0 - out[i]);
    }
  });
}

Var softmax_channels(const Var& x) {
  const auto [n, c, h, w] = dims4(x.value(), "softmax_channels");
  if (c == 0) throw ContractError("softmax_channels: needs at least one channel");
  const std::size_t hw = h * w;
  Tensor out(x.shape());
  const auto& xv = x.value();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t p = 0; p < hw; ++p) {
      const std::size_t base = b * c * hw + p;
      double mx = xv[base];
      for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, xv[base + k * hw]);
      double z = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        const double e = std::exp(xv[base + k * hw] - mx);
        out[base + k * hw] = e;
        z += e;
      }
      for (std::size_t k = 0; k < c; ++k) out[base + k * hw] /= z;
    }
  }
  return Var::make(out, {x}, [out, n, c, hw](detail::Node& node) {
    Tensor* gx = input_grad(node, 0);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t p = 0; p < hw; ++p) {
        const std::size_t base = b * c * hw + p;
        double dot = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
          dot += node.grad[base + k * hw] * out[base + k * hw];
        }
        for (std::size_t k = 0; k < c; ++k) {
          const std::size_t i = base + k * hw;
          (*gx)[i] += out[i] * (node.grad[i] - dot);
        }
      }
    }
  });
}

Var upsample_bilinear(const Var& x, std::size_t target_h, std::size_t target_w) {
  const auto [n, c, h, w] = dims4(x.value(), "upsample_bilinear");
  if (target_h == 0 || target_w == 0) {
    throw ContractError("upsample_bilinear: target extents must be >= 1");
  }
  auto ty = std::make_shared<Taps>(resize_taps(h, target_h));
  auto tx = std::make_shared<Taps>(resize_taps(w, target_w));
  Tensor out({n, c, target_h, target_w});
  const auto& xv = x.value();
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const double* src = xv.data().data() + plane * h * w;
    double* dst = out.data().data() + plane * target_h * target_w;
    for (std::size_t oy = 0; oy < target_h; ++oy) {
      const double fy = ty->frac[oy];
      const double* r0 = src + ty->lo[oy] * w;
      const double* r1 = src + ty->hi[oy] * w;
      for (std::size_t ox = 0; ox < target_w; ++ox) {
        const double fx = tx->frac[ox];
        const std::size_t x0 = tx->lo[ox], x1 = tx->hi[ox];
        dst[oy * target_w + ox] = (1.0 - fy) * ((1.0 - fx) * r0[x0] + fx * r0[x1]) +
                                  fy * ((1.0 - fx) * r1[x0] + fx * r1[x1]);
      }
    }
  }
  return Var::make(std::move(out), {x},
                   [=](detail::Node& node) {
    Tensor* gx = input_grad(node, 0);
    for (std::size_t plane = 0; plane < n * c; ++plane) {
      double* gsrc = gx->data().data() + plane * h * w;
      const double* g = node.grad.data().data() + plane * target_h * target_w;
      for (std::size_t oy = 0; oy < target_h; ++oy) {
        const double fy = ty->frac[oy];
        double* r0 = gsrc + ty->lo[oy] * w;
        double* r1 = gsrc + ty->hi[oy] * w;
        for (std::size_t ox = 0; ox < target_w; ++ox) {
          const double fx = tx->frac[ox];
          const std::size_t x0 = tx->lo[ox], x1 = tx->hi[ox];
          const double gv = g[oy * target_w + ox];
          r0[x0] += gv * (1.0 - fy) * (1.0 - fx);
          r0[x1] += gv * (1.0 - fy) * fx;
          r1[x0] += gv * fy * (1.0 - fx);
          r1[x1] += gv * fy * fx;
        }
      }
    }
  });
}

Var bilinear_sample(const Var& feature, const Var& xs, const Var& ys) {
  const auto [n, c, h, w] = dims4(feature.value(), "bilinear_sample feature");
  const auto cd = dims4(xs.value(), "bilinear_sample xs");
  require_same_shape(xs, ys, "bilinear_sample coordinates");
  if (cd.n != n || cd.c != 1) {
    throw ContractError("bilinear_sample: coordinates must be " +
                        std::to_string(n) + " x 1 x H x W, got " +
                        shape_str(xs.shape()));
  }
  const std::size_t ho = cd.h, wo = cd.w;
  const std::size_t hw = h * w, ohw = ho * wo;
  Tensor out({n, c, ho, wo});
  const auto& fv = feature.value();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t p = 0; p < ohw; ++p) {
      const Tap tx = sample_tap(xs.value()[b * ohw + p], w);
      const Tap ty = sample_tap(ys.value()[b * ohw + p], h);
      const double w00 = (1.0 - ty.frac) * (1.0 - tx.frac);
      const double w01 = (1.0 - ty.frac) * tx.frac;
      const double w10 = ty.frac * (1.0 - tx.frac);
      const double w11 = ty.frac * tx.frac;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* f = fv.data().data() + (b * c + ch) * hw;
        out[(b * c + ch) * ohw + p] =
            w00 * f[ty.lo * w + tx.lo] + w01 * f[ty.lo * w + tx.hi] +
            w10 * f[ty.hi * w + tx.lo] + w11 * f[ty.hi * w + tx.hi];
      }
    }
  }
  return Var::make(std::move(out), {feature, xs, ys},
                   [=](detail::Node& node) {
    Tensor* gf = input_grad(node, 0);
    Tensor* gxs = input_grad(node, 1);
    Tensor* gys = input_grad(node, 2);
    const Tensor& f = node.inputs[0]->value;
    const Tensor& xsv = node.inputs[1]->value;
    const Tensor& ysv = node.inputs[2]->value;
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t p = 0; p < ohw; ++p) {
        const Tap tx = sample_tap(xsv[b * ohw + p], w);
        const Tap ty = sample_tap(ysv[b * ohw + p], h);
        double dx = 0.0, dy = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch) {
          const std::size_t plane = (b * c + ch) * hw;
          const double g = node.grad[(b * c + ch) * ohw + p];
          const double f00 = f[plane + ty.lo * w + tx.lo];
          const double f01 = f[plane + ty.lo * w + tx.hi];
          const double f10 = f[plane + ty.hi * w + tx.lo];
          const double f11 = f[plane + ty.hi * w + tx.hi];
          if (gf) {
            (*gf)[plane + ty.lo * w + tx.lo] += g * (1.0 - ty.frac) * (1.0 - tx.frac);
            (*gf)[plane + ty.lo * w + tx.hi] += g * (1.0 - ty.frac) * tx.frac;
            (*gf)[plane + ty.hi * w + tx.lo] += g * ty.frac * (1.0 - tx.frac);
            (*gf)[plane + ty.hi * w + tx.hi] += g * ty.frac * tx.frac;
          }
          dx += g * ((1.0 - ty.frac) * (f01 - f00) + ty.frac * (f11 - f10));
          dy += g * ((1.0 - tx.frac) * (f10 - f00) + tx.frac * (f11 - f01));
        }
        if (gxs && tx.interior && w > 1) (*gxs)[b * ohw + p] += dx;
        if (gys && ty.interior && h > 1) (*gys)[b * ohw + p] += dy;
      }
    }
  });
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat_channels: no inputs");
  const auto d0 = dims4(parts[0].value(), "concat_channels");
  std::size_t ctotal = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    const auto d = dims4(p.value(), "concat_channels");
    if (d.n != d0.n || d.h != d0.h || d.w != d0.w) {
      throw ContractError("concat_channels: incompatible shapes " +
                          shape_str(parts[0].shape()) + " and " +
                          shape_str(p.shape()));
    }
    offsets.push_back(ctotal);
    ctotal += d.c;
  }
  const std::size_t hw = d0.h * d0.w;
  Tensor out({d0.n, ctotal, d0.h, d0.w});
  for (std::size_t b = 0; b < d0.n; ++b) {
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const std::size_t ci = parts[i].shape()[1];
      const double* src = parts[i].value().data().data() + b * ci * hw;
      std::copy(src, src + ci * hw,
                out.data().data() + (b * ctotal + offsets[i]) * hw);
    }
  }
  return Var::make(std::move(out), parts,
                   [=, nb = d0.n](detail::Node& node) {
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      Tensor* g = input_grad(node, i);
      if (!g) continue;
      const std::size_t ci = node.inputs[i]->value.dim(1);
      for (std::size_t b = 0; b < nb; ++b) {
        const double* src = node.grad.data().data() + (b * ctotal + offsets[i]) * hw;
        double* dst = g->data().data() + b * ci * hw;
        for (std::size_t j = 0; j < ci * hw; ++j) dst[j] += src[j];
      }
    }
  });
}

Var slice_channels(const Var& x, std::size_t begin, std::size_t end) {
  const auto [n, c, h, w] = dims4(x.value(), "slice_channels");
  if (begin >= end || end > c) {
    throw ContractError("slice_channels: invalid range [" + std::to_string(begin) +
                        ", " + std::to_string(end) + ") of " + std::to_string(c));
  }
  const std::size_t hw = h * w, cs = end - begin;
  Tensor out({n, cs, h, w});
  for (std::size_t b = 0; b < n; ++b) {
    const double* src = x.value().data().data() + (b * c + begin) * hw;
    std::copy(src, src + cs * hw, out.data().data() + b * cs * hw);
  }
  return Var::make(std::move(out), {x}, [=](detail::Node& node) {
    Tensor* g = input_grad(node, 0);
    for (std::size_t b = 0; b < n; ++b) {
      double* dst = g->data().data() + (b * c + begin) * hw;
      const double* src = node.grad.data().data() + b * cs * hw;
      for (std::size_t j = 0; j < cs * hw; ++j) dst[j] += src[j];
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + b.value()[i];
  return Var::make(std::move(out), {a, b}, [](detail::Node& node) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (Tensor* g = input_grad(node, k)) {
        for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += node.grad[i];
      }
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] - b.value()[i];
  return Var::make(std::move(out), {a, b}, [](detail::Node& node) {
    if (Tensor* g = input_grad(node, 0)) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += node.grad[i];
    }
    if (Tensor* g = input_grad(node, 1)) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] -= node.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  return Var::make(std::move(out), {a, b}, [](detail::Node& node) {
    const Tensor& av = node.inputs[0]->value;
    const Tensor& bv = node.inputs[1]->value;
    if (Tensor* g = input_grad(node, 0)) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += node.grad[i] * bv[i];
    }
    if (Tensor* g = input_grad(node, 1)) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += node.grad[i] * av[i];
    }
  });
}

Var mul_channel_broadcast(const Var& x, const Var& m) {
  const auto [n, c, h, w] = dims4(x.value(), "mul_channel_broadcast");
  if (m.shape() != Shape{n, 1, h, w}) {
    throw ContractError("mul_channel_broadcast: mask shape " +
                        shape_str(m.shape()) + " does not broadcast over " +
                        shape_str(x.shape()));
  }
  const std::size_t hw = h * w;
  Tensor out(x.shape());
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t p = 0; p < hw; ++p) {
        out[(b * c + ch) * hw + p] = x.value()[(b * c + ch) * hw + p] * m.value()[b * hw + p];
      }
    }
  }
  return Var::make(std::move(out), {x, m}, [=](detail::Node& node) {
    const Tensor& xv = node.inputs[0]->value;
    const Tensor& mv = node.inputs[1]->value;
    Tensor* gx = input_grad(node, 0);
    Tensor* gm = input_grad(node, 1);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t p = 0; p < hw; ++p) {
          const std::size_t i = (b * c + ch) * hw + p;
          if (gx) (*gx)[i] += node.grad[i] * mv[b * hw + p];
          if (gm) (*gm)[b * hw + p] += node.grad[i] * xv[i];
        }
      }
    }
  });
}

Var affine(const Var& x, double a, double b) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a * x.value()[i] + b;
  return Var::make(std::move(out), {x}, [a](detail::Node& node) {
    Tensor* g = input_grad(node, 0);
    for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += a * node.grad[i];
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return Var::make(Tensor::scalar(s), {x}, [](detail::Node& node) {
    Tensor* g = input_grad(node, 0);
    const double gv = node.grad[0];
    for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += gv;
  });
}

Var mean(const Var& x) {
  if (x.value().numel() == 0) throw ContractError("mean of empty tensor");
  return affine(sum(x), 1.0 / static_cast<double>(x.value().numel()), 0.0);
}

std::vector<std::uint8_t> argmax_channels(const Tensor& x) {
  const auto [n, c, h, w] = dims4(x, "argmax_channels");
  const std::size_t hw = h * w;
  std::vector<std::uint8_t> out(n * hw);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t p = 0; p < hw; ++p) {
      std::size_t best = 0;
      double bv = x[b * c * hw + p];
      for (std::size_t k = 1; k < c; ++k) {
        const double v = x[(b * c + k) * hw + p];
        if (v > bv) {
          bv = v;
          best = k;
        }
      }
      out[b * hw + p] = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

}  // namespace bda::ops
