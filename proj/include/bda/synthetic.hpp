#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bda/dataset.hpp"
#include "bda/rng.hpp"

namespace bda::synthetic {

using Rgb = std::array<double, 3>;

// Appearance of one synthetic "disaster domain". Post-event roofs are
// recolored per damage level; L1 roofs keep the pre-event color.
struct Style {
  Rgb background{0.22, 0.42, 0.24};
  Rgb roof{0.72, 0.72, 0.70};
  std::array<Rgb, 4> damaged_roof{{{0.72, 0.72, 0.70},
                                   {0.86, 0.74, 0.34},
                                   {0.40, 0.44, 0.80},
                                   {0.34, 0.22, 0.12}}};
  double noise = 0.04;
  // Post image content is shifted by this many pixels to the right, a crude
  // co-registration error.
  int post_shift_x = 0;
};

Style domain_style(int domain);

struct Building {
  std::size_t x0, y0, x1, y1;  // half-open pixel rectangle
  std::uint8_t level;          // 1..4
};

Sample render_sample(const std::string& id, std::size_t size,
                     const std::vector<Building>& buildings, const Style& style, Rng& rng);

// Buildings of all four damage levels in every image, one per quadrant.
std::vector<Sample> overfit_fixture(std::size_t count, std::size_t size, std::uint64_t seed,
                                    const Style& style = {});

// Default look of the imbalance fixture: L3 roofs differ only slightly from
// intact ones.
Style imbalance_style();

// Two damage levels only: L1 (majority) and L3 (minority) with roughly a
// 20:1 building-pixel ratio across the set. Small buildings on an 8-pixel
// grid; size must be a multiple of 8.
std::vector<Sample> imbalanced_fixture(std::size_t count, std::size_t size,
                                       std::uint64_t seed, double majority_ratio = 20.0,
                                       const Style& style = imbalance_style());

// Mixed-level scenes in the given domain's style.
std::vector<Sample> domain_fixture(int domain, std::size_t count, std::size_t size,
                                   std::uint64_t seed);

}  // namespace bda::synthetic
