#pragma once

#include <cstddef>
#include <span>

#include "bda/labels.hpp"
#include "bda/mask.hpp"

namespace bda {

enum class MaskMode { kLoc, kDmg };

// Two independent rasterizers with the same containment rule: a pixel (x, y)
// belongs to a polygon iff its center (x + 0.5, y + 0.5) is inside under the
// even-odd rule.
enum class RasterAlgorithm {
  kScanline,        // per-row edge crossings, filled as spans
  kPointInPolygon,  // per-pixel crossing-number test inside the bounding box
};

// Later polygons overwrite earlier ones. In kDmg mode each polygon writes its
// damage value (un-classified buildings are written as no-damage with a
// warning); in kLoc mode every polygon writes 1.
Mask rasterize_mask(std::span<const BuildingPolygon> polys, std::size_t height,
                    std::size_t width, MaskMode mode,
                    RasterAlgorithm algo = RasterAlgorithm::kScanline);

// Even-odd containment of a point against all rings of a polygon.
bool polygon_contains(const BuildingPolygon& poly, double x, double y);

}  // namespace bda
