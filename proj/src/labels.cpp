#include "bda/labels.hpp"

#include <cctype>
#include <charconv>
#include "json.hpp"

#include "bda/errors.hpp"

namespace bda {

namespace {

using nlohmann::json;

struct SubtypeName {
  std::string_view name;
  DamageSubtype value;
};

constexpr SubtypeName kSubtypes[] = {
    {"no-damage", DamageSubtype::kNoDamage},
    {"minor-damage", DamageSubtype::kMinorDamage},
    {"major-damage", DamageSubtype::kMajorDamage},
    {"destroyed", DamageSubtype::kDestroyed},
    {"un-classified", DamageSubtype::kUnclassified},
};

class WktReader {
 public:
  explicit WktReader(std::string_view s) : s_(s) {}

  std::vector<Ring> polygon() {
    skip_ws();
    expect_word("POLYGON");
    skip_ws();
    if (peek_word("EMPTY")) return {};
    expect('(');
    std::vector<Ring> rings;
    while (true) {
      rings.push_back(ring());
      skip_ws();
      if (consume(',')) continue;
      expect(')');
      break;
    }
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters");
    return rings;
  }

 private:
  Ring ring() {
    skip_ws();
    expect('(');
    Ring r;
    while (true) {
      const double x = number();
      const double y = number();
      r.push_back({x, y});
      skip_ws();
      if (consume(',')) continue;
      expect(')');
      break;
    }
    return r;
  }

  double number() {
    skip_ws();
    const char* begin = s_.data() + pos_;
    const char* end = s_.data() + s_.size();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr == begin) fail("expected number");
    pos_ += static_cast<std::size_t>(ptr - begin);
    return v;
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool consume(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!consume(c)) fail(std::string("expected '") + c + "'");
  }
  bool peek_word(std::string_view w) {
    if (s_.substr(pos_, w.size()) == w) {
      pos_ += w.size();
      return true;
    }
    return false;
  }
  void expect_word(std::string_view w) {
    if (!peek_word(w)) fail("expected " + std::string(w));
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("WKT: " + what + " at offset " + std::to_string(pos_));
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

Ring ring_from_array(const json& arr) {
  Ring r;
  for (const auto& pt : arr) {
    if (!pt.is_array() || pt.size() < 2 || !pt[0].is_number() || !pt[1].is_number()) {
      throw ParseError("coordinate entry is not an [x, y] pair");
    }
    r.push_back({pt[0].get<double>(), pt[1].get<double>()});
  }
  return r;
}

// Accepts either a single ring [[x,y],...] or a ring list [[[x,y],...],...].
std::vector<Ring> rings_from_array(const json& arr) {
  if (!arr.is_array() || arr.empty()) throw ParseError("empty coordinate array");
  if (arr[0].is_array() && !arr[0].empty() && arr[0][0].is_array()) {
    std::vector<Ring> rings;
    for (const auto& r : arr) rings.push_back(ring_from_array(r));
    return rings;
  }
  return {ring_from_array(arr)};
}

// Drops the explicit closing vertex and consecutive duplicates.
Ring normalize_ring(Ring r) {
  Ring out;
  for (const auto& p : r) {
    if (out.empty() || !(out.back() == p)) out.push_back(p);
  }
  while (out.size() > 1 && out.back() == out.front()) out.pop_back();
  return out;
}

std::vector<Ring> feature_rings(const json& f) {
  if (f.contains("wkt")) return parse_wkt_polygon(f.at("wkt").get<std::string>());
  if (f.contains("geometry")) {
    const auto& g = f.at("geometry");
    if (g.is_string()) return parse_wkt_polygon(g.get<std::string>());
    if (g.is_object() && g.contains("coordinates")) return rings_from_array(g.at("coordinates"));
    throw ParseError("unsupported geometry");
  }
  if (f.contains("coordinates")) return rings_from_array(f.at("coordinates"));
  throw ParseError("feature has no geometry");
}

}  // namespace

std::optional<DamageSubtype> parse_subtype(std::string_view s) {
  for (const auto& e : kSubtypes) {
    if (e.name == s) return e.value;
  }
  return std::nullopt;
}

std::string_view subtype_name(DamageSubtype s) {
  for (const auto& e : kSubtypes) {
    if (e.value == s) return e.name;
  }
  return "unknown";
}

std::uint8_t damage_value(DamageSubtype s) {
  switch (s) {
    case DamageSubtype::kNoDamage: return 1;
    case DamageSubtype::kMinorDamage: return 2;
    case DamageSubtype::kMajorDamage: return 3;
    case DamageSubtype::kDestroyed: return 4;
    case DamageSubtype::kUnclassified: return 1;
  }
  return 1;
}

std::vector<Ring> parse_wkt_polygon(std::string_view wkt) {
  return WktReader(wkt).polygon();
}

std::vector<BuildingPolygon> parse_labels(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("label document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("features")) {
    throw ParseError("label document has no 'features' entry");
  }
  const json* features = &doc.at("features");
  if (features->is_object()) {
    if (!features->contains("xy")) throw ParseError("'features' object has no 'xy' list");
    features = &features->at("xy");
  }
  if (!features->is_array()) throw ParseError("'features' is not a list");

  std::vector<BuildingPolygon> polys;
  for (std::size_t i = 0; i < features->size(); ++i) {
    const auto& f = (*features)[i];
    const std::string where = "feature " + std::to_string(i) + ": ";
    try {
      if (!f.is_object()) throw ParseError("not an object");
      auto rings = feature_rings(f);
      if (rings.empty()) throw ParseError("empty polygon");
      BuildingPolygon poly;
      poly.ring = normalize_ring(std::move(rings[0]));
      if (poly.ring.size() < 3) throw ParseError("ring has fewer than 3 vertices");
      for (std::size_t r = 1; r < rings.size(); ++r) {
        auto hole = normalize_ring(std::move(rings[r]));
        if (hole.size() >= 3) poly.holes.push_back(std::move(hole));
      }
      if (f.contains("properties") && f.at("properties").contains("subtype")) {
        const auto name = f.at("properties").at("subtype").get<std::string>();
        const auto st = parse_subtype(name);
        if (!st) throw ParseError("unknown damage subtype '" + name + "'");
        poly.subtype = *st;
      }
      polys.push_back(std::move(poly));
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    } catch (const json::exception& e) {
      throw ParseError(where + e.what());
    }
  }
  return polys;
}

}  // namespace bda
