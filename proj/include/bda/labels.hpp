#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bda {

enum class DamageSubtype : std::uint8_t {
  kNoDamage,
  kMinorDamage,
  kMajorDamage,
  kDestroyed,
  kUnclassified,
};

std::optional<DamageSubtype> parse_subtype(std::string_view s);
std::string_view subtype_name(DamageSubtype s);
// Damage-mask value: 1..4 for the four damage levels; un-classified maps to 1.
std::uint8_t damage_value(DamageSubtype s);

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

using Ring = std::vector<Point>;

// One annotated building. Vertices are pixel coordinates; the ring is closed
// implicitly. Holes, if present, take part in even-odd containment.
struct BuildingPolygon {
  Ring ring;
  std::vector<Ring> holes;
  DamageSubtype subtype = DamageSubtype::kNoDamage;
};

// Parses an xBD-style label document. Accepted shapes:
//   {"features": [ ... ]}  or  {"features": {"xy": [ ... ]}}
// Each feature carries its geometry as one of
//   "wkt": "POLYGON ((x y, x y, ...))"
//   "geometry": "POLYGON (...)" | {"coordinates": [[[x, y], ...]]}
//   "coordinates": [[x, y], ...] | [[[x, y], ...], ...]
// and its damage level as properties.subtype (absent means no-damage).
// Throws ParseError naming the offending feature index.
std::vector<BuildingPolygon> parse_labels(std::string_view text);

// Parses "POLYGON ((x y, ...), (x y, ...))" into rings (outer first).
std::vector<Ring> parse_wkt_polygon(std::string_view wkt);

}  // namespace bda
