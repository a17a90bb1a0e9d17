#pragma once

#include <cstddef>

#include "bda/dataset.hpp"
#include "bda/rng.hpp"

namespace bda {

// Geometric transform shared by both images and both masks of a sample.
// Applied in the order: horizontal flip, vertical flip, counter-clockwise
// rotation by rot90 * 90 degrees, crop window at (crop_y, crop_x).
struct AugmentParams {
  bool hflip = false;
  bool vflip = false;
  int rot90 = 0;  // 0..3
  std::size_t crop = 0;  // square window side; 0 keeps the whole frame
  std::size_t crop_y = 0;
  std::size_t crop_x = 0;

  static AugmentParams identity() { return {}; }
};

// Draws, in this order: hflip (p = 0.5), vflip (p = 0.5), rotation k uniform
// in {0..3}, crop offsets uniform over valid positions. Throws ConfigError
// when crop exceeds min(h, w).
AugmentParams draw_augment(Rng& rng, std::size_t h, std::size_t w, std::size_t crop);

Sample apply_augment(const Sample& s, const AugmentParams& p);

inline Sample augment_sample(const Sample& s, Rng& rng, std::size_t crop) {
  return apply_augment(s, draw_augment(rng, s.pre.dim(1), s.pre.dim(2), crop));
}

}  // namespace bda
