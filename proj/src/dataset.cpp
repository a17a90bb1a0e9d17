#include "bda/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "bda/errors.hpp"
#include "bda/image_io.hpp"
#include "bda/rng.hpp"

namespace bda {

namespace fs = std::filesystem;

DatasetStats dataset_stats(std::span<const Mask> dmg_masks) {
  DatasetStats s;
  s.total_images = dmg_masks.size();
  for (const Mask& m : dmg_masks) {
    std::array<bool, kDamageClasses> present{};
    for (std::uint8_t v : m.values) {
      if (v == 0) continue;
      if (v > kMaxDamageValue) throw DataError("damage mask value out of range");
      ++s.pixel_counts[v - 1];
      present[v - 1] = true;
    }
    for (std::size_t k = 0; k < kDamageClasses; ++k) s.image_counts[k] += present[k];
  }
  std::uint64_t building = 0;
  for (auto c : s.pixel_counts) building += c;
  if (building > 0) {
    for (std::size_t k = 0; k < kDamageClasses; ++k) {
      s.pixel_ratios[k] =
          static_cast<double>(s.pixel_counts[k]) / static_cast<double>(building);
    }
  }
  return s;
}

const std::vector<std::string>& SplitManifest::split(const std::string& which) const {
  if (which == "train") return train;
  if (which == "valid") return valid;
  if (which == "test") return test;
  throw ConfigError("unknown split '" + which + "' (expected train, valid or test)");
}

SplitManifest split_dataset(std::vector<std::string> ids, const SplitRatios& r,
                            std::uint64_t seed) {
  if (r.train < 0.0 || r.valid < 0.0 || r.test < 0.0) {
    throw ConfigError("split ratios must be non-negative");
  }
  if (std::abs(r.train + r.valid + r.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
  Rng rng(seed);
  shuffle(ids.begin(), ids.end(), rng);
  const auto n = static_cast<double>(ids.size());
  // The small slack absorbs representation error (10 * 0.7 = 7.000000000000001).
  const auto n_valid = static_cast<std::size_t>(std::floor(n * r.valid + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(n * r.test + 1e-9));
  SplitManifest m;
  m.seed = seed;
  const auto valid_begin = ids.end() - static_cast<long>(n_valid + n_test);
  const auto test_begin = ids.end() - static_cast<long>(n_test);
  m.train.assign(ids.begin(), valid_begin);
  m.valid.assign(valid_begin, test_begin);
  m.test.assign(test_begin, ids.end());
  return m;
}

std::string manifest_to_json(const SplitManifest& m) {
  nlohmann::ordered_json j;
  j["name"] = m.name;
  j["root"] = m.root;
  j["seed"] = m.seed;
  j["train"] = m.train;
  j["valid"] = m.valid;
  j["test"] = m.test;
  return j.dump(2) + "\n";
}

SplitManifest manifest_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    SplitManifest m;
    m.name = j.value("name", std::string{});
    m.root = j.value("root", std::string{});
    m.seed = j.value("seed", std::uint64_t{0});
    m.train = j.value("train", std::vector<std::string>{});
    m.valid = j.value("valid", std::vector<std::string>{});
    m.test = j.value("test", std::vector<std::string>{});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
}

SplitManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read manifest '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  SplitManifest m = manifest_from_json(ss.str());
  if (m.root.empty()) {
    m.root = path.parent_path().string();
  } else if (fs::path(m.root).is_relative()) {
    m.root = (path.parent_path() / m.root).lexically_normal().string();
  }
  return m;
}

void write_manifest(const fs::path& path, const SplitManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest '" + path.string() + "'");
  out << manifest_to_json(m);
}

fs::path pre_image_path(const fs::path& root, const std::string& id) {
  return root / "images" / (id + "_pre_disaster.png");
}
fs::path post_image_path(const fs::path& root, const std::string& id) {
  return root / "images" / (id + "_post_disaster.png");
}
fs::path loc_mask_path(const fs::path& root, const std::string& id) {
  return root / "masks" / (id + "_pre_mask.png");
}
fs::path dmg_mask_path(const fs::path& root, const std::string& id) {
  return root / "masks" / (id + "_post_mask.png");
}

Sample load_sample(const fs::path& root, const std::string& id) {
  Sample s;
  s.id = id;
  s.pre = load_rgb(pre_image_path(root, id));
  s.post = load_rgb(post_image_path(root, id));
  if (s.pre.shape() != s.post.shape()) {
    throw DataError("sample '" + id + "': pre and post images differ in size");
  }
  s.masks.dmg = load_mask(dmg_mask_path(root, id));
  const fs::path loc = loc_mask_path(root, id);
  s.masks.loc = fs::exists(loc) ? load_mask(loc) : loc_from_dmg(s.masks.dmg);
  if (s.masks.dmg.height != s.pre.dim(1) || s.masks.dmg.width != s.pre.dim(2)) {
    throw DataError("sample '" + id + "': mask and image sizes differ");
  }
  try {
    s.masks.validate();
  } catch (const DataError& e) {
    throw DataError("sample '" + id + "': " + e.what());
  }
  return s;
}

void save_sample(const fs::path& root, const Sample& s) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  save_rgb(pre_image_path(root, s.id), s.pre);
  save_rgb(post_image_path(root, s.id), s.post);
  save_mask(loc_mask_path(root, s.id), s.masks.loc);
  save_mask(dmg_mask_path(root, s.id), s.masks.dmg);
}

std::vector<std::string> list_sample_ids(const fs::path& root) {
  const std::string suffix = "_pre_disaster.png";
  std::vector<std::string> ids;
  if (!fs::is_directory(root / "images")) return ids;
  for (const auto& e : fs::directory_iterator(root / "images")) {
    const std::string name = e.path().filename().string();
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      ids.push_back(name.substr(0, name.size() - suffix.size()));
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace bda
