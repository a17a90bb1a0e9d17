#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "bda/augment.hpp"
#include "bda/dataset.hpp"
#include "bda/errors.hpp"
#include "bda/image_io.hpp"
#include "bda/labels.hpp"
#include "bda/rasterize.hpp"
#include "bda/synthetic.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bda;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bda_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

BuildingPolygon rect(double x0, double y0, double x1, double y1, DamageSubtype s) {
  return {{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, {}, s};
}

BuildingPolygon random_convex(Rng& rng, double size) {
  const double cx = rng.uniform(0.2, 0.8) * size, cy = rng.uniform(0.2, 0.8) * size;
  const double r = rng.uniform(0.05, 0.3) * size;
  const int n = 3 + static_cast<int>(rng.below(8));
  std::vector<double> angles;
  for (int i = 0; i < n; ++i) angles.push_back(rng.uniform(0.0, 2 * std::numbers::pi));
  std::sort(angles.begin(), angles.end());
  BuildingPolygon p;
  for (double a : angles) p.ring.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
  return p;
}

Sample small_sample(Rng& rng, std::size_t h, std::size_t w) {
  Sample s;
  s.id = "s";
  s.pre = oracle::random_tensor({3, h, w}, rng, 0.0, 1.0);
  s.post = oracle::random_tensor({3, h, w}, rng, 0.0, 1.0);
  s.masks.dmg = oracle::random_mask(h, w, 4, rng);
  s.masks.loc = loc_from_dmg(s.masks.dmg);
  return s;
}

}  // namespace

TEST_CASE("parse_labels") {
  SUBCASE("single square") {
    const auto polys = parse_labels(R"j({"features": [{"properties": {"subtype": "destroyed"},
      "wkt": "POLYGON ((0 0, 4 0, 4 4, 0 4, 0 0))"}]})j");
    REQUIRE(polys.size() == 1);
    CHECK(polys[0].subtype == DamageSubtype::kDestroyed);
    CHECK(polys[0].ring.size() == 4);
  }
  SUBCASE("empty feature list") {
    CHECK(parse_labels(R"j({"features": []})j").empty());
    CHECK(parse_labels(R"j({"features": {"xy": []}})j").empty());
  }
  SUBCASE("WKT and coordinate arrays give identical rings") {
    const auto polys = parse_labels(R"j({"features": {"xy": [
      {"properties": {"subtype": "minor-damage"}, "wkt": "POLYGON ((1.5 2.25, 10 2.25, 10 8, 1.5 8, 1.5 2.25))"},
      {"properties": {"subtype": "minor-damage"}, "geometry": {"coordinates": [[[1.5, 2.25], [10, 2.25], [10, 8], [1.5, 8]]]}},
      {"properties": {"subtype": "minor-damage"}, "coordinates": [[1.5, 2.25], [10, 2.25], [10, 8], [1.5, 8], [1.5, 2.25]]}
    ]}})j");
    REQUIRE(polys.size() == 3);
    CHECK(polys[0].ring == polys[1].ring);
    CHECK(polys[0].ring == polys[2].ring);
    CHECK(polys[0].ring.front() == Point{1.5, 2.25});
  }
  SUBCASE("missing subtype means no damage; un-classified is kept") {
    const auto polys = parse_labels(R"j({"features": [
      {"wkt": "POLYGON ((0 0, 1 0, 1 1))"},
      {"properties": {"subtype": "un-classified"}, "wkt": "POLYGON ((0 0, 1 0, 1 1))"}]})j");
    CHECK(polys[0].subtype == DamageSubtype::kNoDamage);
    CHECK(polys[1].subtype == DamageSubtype::kUnclassified);
    CHECK(damage_value(polys[1].subtype) == 1);
  }
  SUBCASE("holes") {
    const auto polys = parse_labels(
        R"j({"features": [{"wkt": "POLYGON ((0 0, 8 0, 8 8, 0 8, 0 0), (2 2, 6 2, 6 6, 2 6, 2 2))"}]})j");
    REQUIRE(polys[0].holes.size() == 1);
    const Mask m = rasterize_mask(polys, 8, 8, MaskMode::kLoc);
    CHECK(m.at(0, 0) == 1);
    CHECK(m.at(3, 3) == 0);
  }
  SUBCASE("errors name the feature") {
    const auto expect_error = [](const char* text, const char* fragment) {
      try {
        parse_labels(text);
        FAIL("expected ParseError");
      } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(fragment) != std::string::npos);
      }
    };
    expect_error("{not json", "");
    expect_error(R"j({"features": [{"wkt": "POLYGON ((0 0, 1 0, 1 1))"}, {"wkt": "POLYGON ((0 0, 1 1))"}]})j",
                 "feature 1");
    expect_error(R"j({"features": [{"properties": {"subtype": "flooded"}, "wkt": "POLYGON ((0 0, 1 0, 1 1))"}]})j",
                 "feature 0");
    expect_error(R"j({"nothing": 1})j", "");
  }
}

TEST_CASE("rasterize_mask") {
  SUBCASE("empty list") {
    const Mask m = rasterize_mask({}, 3, 5, MaskMode::kDmg);
    CHECK(m == Mask(3, 5));
  }
  SUBCASE("2x2 square of minor damage") {
    const std::vector<BuildingPolygon> polys{rect(0, 0, 2, 2, DamageSubtype::kMinorDamage)};
    for (auto algo : {RasterAlgorithm::kScanline, RasterAlgorithm::kPointInPolygon}) {
      const Mask m = rasterize_mask(polys, 4, 4, MaskMode::kDmg, algo);
      for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x) CHECK(m.at(y, x) == ((x < 2 && y < 2) ? 2 : 0));
    }
  }
  SUBCASE("later polygons overwrite earlier ones") {
    const std::vector<BuildingPolygon> polys{rect(0, 0, 3, 3, DamageSubtype::kDestroyed),
                                             rect(2, 2, 5, 5, DamageSubtype::kNoDamage)};
    for (auto algo : {RasterAlgorithm::kScanline, RasterAlgorithm::kPointInPolygon}) {
      const Mask m = rasterize_mask(polys, 6, 6, MaskMode::kDmg, algo);
      CHECK(m.at(2, 2) == 1);
      CHECK(m.at(1, 1) == 4);
      CHECK(m.at(4, 4) == 1);
      const Mask l = rasterize_mask(polys, 6, 6, MaskMode::kLoc, algo);
      CHECK(l.at(1, 1) == 1);
      CHECK(l.at(5, 5) == 0);
    }
  }
  SUBCASE("every level maps to its mask value") {
    const DamageSubtype levels[] = {DamageSubtype::kNoDamage, DamageSubtype::kMinorDamage,
                                    DamageSubtype::kMajorDamage, DamageSubtype::kDestroyed,
                                    DamageSubtype::kUnclassified};
    const int expected[] = {1, 2, 3, 4, 1};
    for (int i = 0; i < 5; ++i) {
      const std::vector<BuildingPolygon> polys{rect(0, 0, 1, 1, levels[i])};
      CHECK(rasterize_mask(polys, 1, 1, MaskMode::kDmg).at(0, 0) == expected[i]);
    }
  }
  SUBCASE("pixel centers decide membership") {
    const std::vector<BuildingPolygon> polys{rect(0.6, 0.6, 2.4, 2.4, DamageSubtype::kDestroyed)};
    const Mask m = rasterize_mask(polys, 4, 4, MaskMode::kLoc);
    CHECK(m.at(0, 0) == 0);
    CHECK(m.at(1, 1) == 1);
    CHECK(m.at(2, 2) == 0);
  }
  SUBCASE("degenerate polygon") {
    const std::vector<BuildingPolygon> polys{{{{0, 0}, {3, 3}, {6, 6}}, {}, DamageSubtype::kNoDamage}};
    CHECK(rasterize_mask(polys, 8, 8, MaskMode::kLoc) == Mask(8, 8));
  }
  SUBCASE("translation consistency") {
    Rng rng(11);
    for (int t = 0; t < 20; ++t) {
      BuildingPolygon p = random_convex(rng, 32);
      const long dx = static_cast<long>(rng.below(7)) - 3, dy = static_cast<long>(rng.below(7)) - 3;
      BuildingPolygon q = p;
      for (auto& v : q.ring) {
        v.x += dx;
        v.y += dy;
      }
      const std::vector<BuildingPolygon> a{p}, b{q};
      const Mask ma = rasterize_mask(a, 32, 32, MaskMode::kLoc);
      const Mask mb = rasterize_mask(b, 32, 32, MaskMode::kLoc);
      for (long y = 0; y < 32; ++y)
        for (long x = 0; x < 32; ++x) {
          const long sy = y - dy, sx = x - dx;
          if (sy < 0 || sy >= 32 || sx < 0 || sx >= 32) continue;
          CHECK(mb.at(y, x) == ma.at(sy, sx));
        }
    }
  }
  SUBCASE("mask pair consistency and dual-rasterizer agreement") {
    Rng rng(12);
    std::vector<BuildingPolygon> polys;
    for (int i = 0; i < 10; ++i) {
      polys.push_back(random_convex(rng, 64));
      polys.back().subtype = static_cast<DamageSubtype>(rng.below(5));
    }
    const MaskPair mp{rasterize_mask(polys, 64, 64, MaskMode::kLoc),
                      rasterize_mask(polys, 64, 64, MaskMode::kDmg)};
    CHECK_NOTHROW(mp.validate());
    const Mask alt = rasterize_mask(polys, 64, 64, MaskMode::kDmg, RasterAlgorithm::kPointInPolygon);
    CHECK(pixel_agreement(mp.dmg, alt) >= 0.998);
  }
}

TEST_CASE("pixel_agreement") {
  Mask a(4, 4, 1);
  CHECK(pixel_agreement(a, a) == 1.0);
  Mask b = a;
  b.at(2, 3) = 0;
  CHECK(pixel_agreement(a, b) == 0.9375);
  CHECK_THROWS_AS(pixel_agreement(a, Mask(4, 5)), ContractError);
}

TEST_CASE("mask pair validation") {
  MaskPair mp{Mask(2, 2), Mask(2, 2)};
  CHECK_NOTHROW(mp.validate());
  mp.dmg.at(0, 0) = 3;
  CHECK_THROWS_AS(mp.validate(), DataError);
  mp.loc.at(0, 0) = 1;
  CHECK_NOTHROW(mp.validate());
  mp.dmg.at(1, 1) = 5;
  CHECK_THROWS_AS(mp.validate(), DataError);
  CHECK_THROWS_AS((MaskPair{Mask(2, 2), Mask(2, 3)}.validate()), DataError);
}

TEST_CASE("dataset_stats") {
  SUBCASE("empty input") {
    const DatasetStats s = dataset_stats({});
    CHECK(s.total_images == 0);
    for (double r : s.pixel_ratios) CHECK(r == 0.0);
  }
  SUBCASE("all background") {
    const std::vector<Mask> m{Mask(3, 3)};
    const DatasetStats s = dataset_stats(m);
    CHECK(s.total_images == 1);
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(s.image_counts[k] == 0);
      CHECK(s.pixel_ratios[k] == 0.0);
    }
  }
  SUBCASE("hand count") {
    Mask a(2, 2), b(2, 2);
    a.values = {1, 1, 4, 0};
    b.values = {0, 0, 0, 4};
    const std::vector<Mask> m{a, b};
    const DatasetStats s = dataset_stats(m);
    CHECK(s.total_images == 2);
    CHECK(s.image_counts == std::array<std::size_t, 4>{1, 0, 0, 2});
    CHECK(s.pixel_ratios[0] == 0.5);
    CHECK(s.pixel_ratios[3] == 0.5);
  }
  SUBCASE("constructed 76/9/9/6 mix") {
    std::vector<Mask> masks;
    const int per_level[] = {76, 9, 9, 6};
    for (int rep = 0; rep < 5; ++rep) {
      Mask m(10, 12);
      std::size_t i = 0;
      for (int k = 0; k < 4; ++k)
        for (int j = 0; j < per_level[k]; ++j) m.values[i++] = static_cast<std::uint8_t>(k + 1);
      masks.push_back(m);
    }
    const DatasetStats s = dataset_stats(masks);
    const double expected[] = {0.76, 0.09, 0.09, 0.06};
    double total = 0.0;
    for (int k = 0; k < 4; ++k) {
      CHECK(std::abs(s.pixel_ratios[k] - expected[k]) < 1e-9);
      CHECK(s.image_counts[k] == 5);
      total += s.pixel_ratios[k];
    }
    CHECK(std::abs(total - 1.0) < 1e-6);
  }
}

TEST_CASE("split_dataset") {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("id" + std::to_string(i));
  SUBCASE("floor sizes with remainder to train") {
    const SplitManifest m = split_dataset(ids, {}, 3);
    // floor(1.5) = 1 each for valid and test; the remaining 8 go to train.
    CHECK(m.train.size() == 8);
    CHECK(m.valid.size() == 1);
    CHECK(m.test.size() == 1);
  }
  SUBCASE("disjoint and exhaustive") {
    const SplitManifest m = split_dataset(ids, {0.5, 0.3, 0.2}, 9);
    std::set<std::string> all(m.train.begin(), m.train.end());
    all.insert(m.valid.begin(), m.valid.end());
    all.insert(m.test.begin(), m.test.end());
    CHECK(all.size() == ids.size());
    CHECK(m.train.size() + m.valid.size() + m.test.size() == ids.size());
  }
  SUBCASE("all in train") {
    const SplitManifest m = split_dataset(ids, {1.0, 0.0, 0.0}, 1);
    CHECK(m.train.size() == 10);
    CHECK(m.valid.empty());
    CHECK(m.test.empty());
  }
  SUBCASE("deterministic") {
    CHECK(split_dataset(ids, {}, 5) == split_dataset(ids, {}, 5));
    CHECK_FALSE(split_dataset(ids, {}, 5).train == split_dataset(ids, {}, 6).train);
  }
  SUBCASE("invalid ratios") {
    CHECK_THROWS_AS(split_dataset(ids, {1.2, -0.1, -0.1}, 0), ConfigError);
    CHECK_THROWS_AS(split_dataset(ids, {0.5, 0.1, 0.1}, 0), ConfigError);
  }
  SUBCASE("manifest json round trip") {
    SplitManifest m = split_dataset(ids, {}, 5);
    m.name = "toy";
    m.root = "data";
    CHECK(manifest_from_json(manifest_to_json(m)) == m);
  }
}

TEST_CASE("augment_sample") {
  Rng rng(13);
  const Sample s = small_sample(rng, 6, 8);
  SUBCASE("identity transform") {
    const Sample out = apply_augment(s, AugmentParams::identity());
    CHECK(out.pre == s.pre);
    CHECK(out.post == s.post);
    CHECK(out.masks == s.masks);
  }
  SUBCASE("horizontal flip") {
    AugmentParams p = AugmentParams::identity();
    p.hflip = true;
    const Sample out = apply_augment(s, p);
    for (std::size_t y = 0; y < 6; ++y)
      for (std::size_t x = 0; x < 8; ++x) {
        CHECK(out.masks.dmg.at(y, 7 - x) == s.masks.dmg.at(y, x));
        CHECK(out.masks.loc.at(y, 7 - x) == s.masks.loc.at(y, x));
        for (std::size_t c = 0; c < 3; ++c) {
          CHECK(out.pre[(c * 6 + y) * 8 + 7 - x] == s.pre[(c * 6 + y) * 8 + x]);
          CHECK(out.post[(c * 6 + y) * 8 + 7 - x] == s.post[(c * 6 + y) * 8 + x]);
        }
      }
  }
  SUBCASE("quarter turns") {
    AugmentParams p = AugmentParams::identity();
    p.rot90 = 1;
    const Sample once = apply_augment(s, p);
    REQUIRE(once.masks.dmg.height == 8);
    REQUIRE(once.masks.dmg.width == 6);
    // Counter-clockwise: the top-right corner moves to the top-left.
    CHECK(once.masks.dmg.at(0, 0) == s.masks.dmg.at(0, 7));
    CHECK(once.masks.dmg.at(7, 0) == s.masks.dmg.at(0, 0));
    Sample cur = once;
    for (int i = 0; i < 3; ++i) cur = apply_augment(cur, p);
    CHECK(cur.masks == s.masks);
    CHECK(cur.pre == s.pre);
  }
  SUBCASE("crop too large") { CHECK_THROWS_AS(draw_augment(rng, 6, 8, 7), ConfigError); }
  SUBCASE("consistency survives 1000 random draws") {
    const Sample sq = small_sample(rng, 8, 8);
    for (int i = 0; i < 1000; ++i) {
      const Sample out = augment_sample(sq, rng, 4 + rng.below(5));
      CHECK_NOTHROW(out.masks.validate());
      CHECK(out.masks.dmg.height == out.pre.dim(1));
    }
  }
  SUBCASE("same stream, same transform") {
    Rng a(21), b(21);
    const Sample sq = small_sample(rng, 8, 8);
    for (int i = 0; i < 10; ++i) CHECK(augment_sample(sq, a, 5).masks == augment_sample(sq, b, 5).masks);
  }
}

TEST_CASE("png round trips and dataset layout") {
  const fs::path dir = scratch_dir("dataio");
  Rng rng(14);
  Mask m = oracle::random_mask(5, 7, 4, rng);
  save_mask(dir / "m.png", m);
  CHECK(load_mask(dir / "m.png") == m);

  Tensor img({3, 4, 6});
  for (std::size_t i = 0; i < img.numel(); ++i) img[i] = static_cast<double>(rng.below(256)) / 255.0;
  save_rgb(dir / "i.png", img);
  const Tensor back = load_rgb(dir / "i.png");
  for (std::size_t i = 0; i < img.numel(); ++i) CHECK(std::abs(back[i] - img[i]) < 1e-12);

  CHECK_THROWS_AS(read_png(dir / "missing.png"), DataError);
  std::ofstream(dir / "bad.png") << "not a png";
  CHECK_THROWS_AS(read_png(dir / "bad.png"), DataError);

  const auto samples = synthetic::overfit_fixture(2, 32, 1);
  for (const auto& s : samples) save_sample(dir / "ds", s);
  CHECK(list_sample_ids(dir / "ds") == std::vector<std::string>{"overfit_0", "overfit_1"});
  const Sample loaded = load_sample(dir / "ds", "overfit_1");
  CHECK(loaded.masks == samples[1].masks);
  CHECK(loaded.pre.shape() == samples[1].pre.shape());
  CHECK_THROWS_AS(load_sample(dir / "ds", "nope"), DataError);

  fs::remove(loc_mask_path(dir / "ds", "overfit_0"));
  CHECK(load_sample(dir / "ds", "overfit_0").masks.loc == samples[0].masks.loc);

  SplitManifest man = split_dataset(list_sample_ids(dir / "ds"), {1.0, 0.0, 0.0}, 0);
  man.root = "ds";
  write_manifest(dir / "manifest.json", man);
  const SplitManifest read = read_manifest(dir / "manifest.json");
  CHECK(fs::equivalent(read.root, dir / "ds"));
  fs::remove_all(dir);
}

TEST_CASE("synthetic fixtures keep their construction") {
  for (const auto& s : synthetic::overfit_fixture(4, 32, 3)) {
    CHECK_NOTHROW(s.masks.validate());
    std::set<int> levels(s.masks.dmg.values.begin(), s.masks.dmg.values.end());
    CHECK(levels == std::set<int>{0, 1, 2, 3, 4});
  }
  const auto imb = synthetic::imbalanced_fixture(12, 32, 4);
  std::vector<Mask> dmg;
  for (const auto& s : imb) dmg.push_back(s.masks.dmg);
  const DatasetStats st = dataset_stats(dmg);
  CHECK(st.pixel_counts[1] == 0);
  CHECK(st.pixel_counts[3] == 0);
  const double ratio = static_cast<double>(st.pixel_counts[0]) / static_cast<double>(st.pixel_counts[2]);
  CHECK(ratio > 17.0);
  CHECK(ratio < 24.0);
}
