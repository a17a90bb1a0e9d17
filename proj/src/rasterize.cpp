#include "bda/rasterize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "bda/errors.hpp"
#include "bda/log.hpp"

namespace bda {

namespace {

// Crossing-number test for one ring: counts edges whose half-open y-span
// contains py and whose intersection lies strictly right of px.
bool ring_crosses_odd(const Ring& ring, double px, double py) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = ring[i];
    const Point& b = ring[j];
    if ((a.y > py) != (b.y > py)) {
      const double xi = a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y);
      if (px < xi) inside = !inside;
    }
  }
  return inside;
}

std::uint8_t fill_value(const BuildingPolygon& p, MaskMode mode) {
  return mode == MaskMode::kLoc ? 1 : damage_value(p.subtype);
}

void fill_point_in_polygon(const BuildingPolygon& poly, std::uint8_t value, Mask& m) {
  double minx = poly.ring[0].x, maxx = minx, miny = poly.ring[0].y, maxy = miny;
  for (const auto& p : poly.ring) {
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  const auto lo = [](double v) { return static_cast<long>(std::floor(v - 0.5)); };
  const auto hi = [](double v) { return static_cast<long>(std::ceil(v - 0.5)); };
  const long x0 = std::max(0L, lo(minx));
  const long x1 = std::min(static_cast<long>(m.width) - 1, hi(maxx));
  const long y0 = std::max(0L, lo(miny));
  const long y1 = std::min(static_cast<long>(m.height) - 1, hi(maxy));
  for (long y = y0; y <= y1; ++y) {
    for (long x = x0; x <= x1; ++x) {
      if (polygon_contains(poly, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) {
        m.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = value;
      }
    }
  }
}

void add_ring_crossings(const Ring& ring, double yc, std::vector<double>& xs) {
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = ring[i];
    const Point& b = ring[(i + 1) % n];
    const bool a_above = a.y > yc;
    const bool b_above = b.y > yc;
    if (a_above == b_above) continue;
    const double t = (yc - a.y) / (b.y - a.y);
    xs.push_back(a.x + t * (b.x - a.x));
  }
}

void fill_scanline(const BuildingPolygon& poly, std::uint8_t value, Mask& m) {
  std::vector<double> xs;
  for (std::size_t y = 0; y < m.height; ++y) {
    const double yc = static_cast<double>(y) + 0.5;
    xs.clear();
    add_ring_crossings(poly.ring, yc, xs);
    for (const auto& h : poly.holes) add_ring_crossings(h, yc, xs);
    if (xs.size() < 2) continue;
    std::sort(xs.begin(), xs.end());
    // Pixel centers xc with xs[2k] <= ... strictly left of xs[2k+1] are inside:
    // an odd number of crossings lies strictly to their right.
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      // first center >= xs[k] that is < xs[k+1]; centers at x + 0.5
      const double from = std::ceil(xs[k] - 0.5);
      const double to = std::ceil(xs[k + 1] - 0.5) - 1.0;
      const long xa = std::max(0L, static_cast<long>(from));
      const long xb = std::min(static_cast<long>(m.width) - 1, static_cast<long>(to));
      for (long x = xa; x <= xb; ++x) m.at(y, static_cast<std::size_t>(x)) = value;
    }
  }
}

}  // namespace

bool polygon_contains(const BuildingPolygon& poly, double x, double y) {
  bool inside = ring_crosses_odd(poly.ring, x, y);
  for (const auto& h : poly.holes) inside ^= ring_crosses_odd(h, x, y);
  return inside;
}

Mask rasterize_mask(std::span<const BuildingPolygon> polys, std::size_t height,
                    std::size_t width, MaskMode mode, RasterAlgorithm algo) {
  if (height == 0 || width == 0) throw ContractError("rasterize_mask: empty grid");
  Mask m(height, width);
  std::size_t unclassified = 0;
  for (const auto& p : polys) {
    if (p.ring.size() < 3) continue;
    if (mode == MaskMode::kDmg && p.subtype == DamageSubtype::kUnclassified) ++unclassified;
    const std::uint8_t v = fill_value(p, mode);
    if (algo == RasterAlgorithm::kScanline) {
      fill_scanline(p, v, m);
    } else {
      fill_point_in_polygon(p, v, m);
    }
  }
  if (unclassified > 0) {
    log_warning(std::to_string(unclassified) +
                " un-classified building(s) rasterized as no-damage");
  }
  return m;
}

}  // namespace bda
