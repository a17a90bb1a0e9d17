#include "bda/augment.hpp"

#include <algorithm>

#include "bda/errors.hpp"

namespace bda {

namespace {

// Source coordinate for each output pixel of the flip+rotate stage.
struct Geometry {
  std::size_t in_h, in_w, out_h, out_w;
  bool hflip, vflip;
  int rot;

  // Maps an output pixel (y, x) of the rotated image to the input pixel.
  void source(std::size_t y, std::size_t x, std::size_t& sy, std::size_t& sx) const {
    // Undo the rotation: the flipped image has in_h x in_w.
    std::size_t fy = y, fx = x;
    switch (rot) {
      case 1:  // out[y][x] = flipped[x][in_w - 1 - y]
        fy = x;
        fx = in_w - 1 - y;
        break;
      case 2:
        fy = in_h - 1 - y;
        fx = in_w - 1 - x;
        break;
      case 3:  // out[y][x] = flipped[in_h - 1 - x][y]
        fy = in_h - 1 - x;
        fx = y;
        break;
      default:
        break;
    }
    sy = vflip ? in_h - 1 - fy : fy;
    sx = hflip ? in_w - 1 - fx : fx;
  }
};

// Output window: the crop square, or the whole transformed frame for crop 0.
struct Window {
  std::size_t y0, x0, h, w;
};

Window window(const Geometry& g, const AugmentParams& p) {
  if (p.crop == 0) return {0, 0, g.out_h, g.out_w};
  return {p.crop_y, p.crop_x, p.crop, p.crop};
}

Tensor transform_image(const Tensor& img, const Geometry& g, const Window& win) {
  const std::size_t c = img.dim(0);
  Tensor out({c, win.h, win.w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < win.h; ++y) {
      for (std::size_t x = 0; x < win.w; ++x) {
        std::size_t sy, sx;
        g.source(y + win.y0, x + win.x0, sy, sx);
        out[(ch * win.h + y) * win.w + x] = img[(ch * g.in_h + sy) * g.in_w + sx];
      }
    }
  }
  return out;
}

Mask transform_mask(const Mask& m, const Geometry& g, const Window& win) {
  Mask out(win.h, win.w);
  for (std::size_t y = 0; y < win.h; ++y) {
    for (std::size_t x = 0; x < win.w; ++x) {
      std::size_t sy, sx;
      g.source(y + win.y0, x + win.x0, sy, sx);
      out.at(y, x) = m.at(sy, sx);
    }
  }
  return out;
}

}  // namespace

AugmentParams draw_augment(Rng& rng, std::size_t h, std::size_t w, std::size_t crop) {
  if (crop == 0 || crop > std::min(h, w)) {
    throw ConfigError("crop " + std::to_string(crop) + " does not fit a " +
                      std::to_string(h) + "x" + std::to_string(w) + " sample");
  }
  AugmentParams p;
  p.hflip = rng.bernoulli(0.5);
  p.vflip = rng.bernoulli(0.5);
  p.rot90 = static_cast<int>(rng.below(4));
  p.crop = crop;
  const bool swap = p.rot90 % 2 == 1;
  const std::size_t rh = swap ? w : h;
  const std::size_t rw = swap ? h : w;
  p.crop_y = static_cast<std::size_t>(rng.below(rh - crop + 1));
  p.crop_x = static_cast<std::size_t>(rng.below(rw - crop + 1));
  return p;
}

Sample apply_augment(const Sample& s, const AugmentParams& p) {
  const std::size_t h = s.pre.dim(1), w = s.pre.dim(2);
  if (p.rot90 < 0 || p.rot90 > 3) throw ConfigError("rotation index must be 0..3");
  const bool swap = p.rot90 % 2 == 1;
  Geometry g{h, w, swap ? w : h, swap ? h : w, p.hflip, p.vflip, p.rot90};
  if (p.crop != 0 && (p.crop_y + p.crop > g.out_h || p.crop_x + p.crop > g.out_w)) {
    throw ConfigError("crop window outside the sample");
  }
  const Window win = window(g, p);
  Sample out;
  out.id = s.id;
  out.pre = transform_image(s.pre, g, win);
  out.post = transform_image(s.post, g, win);
  out.masks.loc = transform_mask(s.masks.loc, g, win);
  out.masks.dmg = transform_mask(s.masks.dmg, g, win);
  return out;
}

}  // namespace bda
