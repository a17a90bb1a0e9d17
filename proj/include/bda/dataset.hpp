#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bda/mask.hpp"
#include "bda/tensor.hpp"

namespace bda {

// Per-level image counts and building-pixel ratios over L1..L4. A sample
// counts toward every level it contains, so the counts need not sum to the
// total.
struct DatasetStats {
  std::array<std::size_t, kDamageClasses> image_counts{};
  std::array<std::uint64_t, kDamageClasses> pixel_counts{};
  std::array<double, kDamageClasses> pixel_ratios{};
  std::size_t total_images = 0;
};

DatasetStats dataset_stats(std::span<const Mask> dmg_masks);

struct SplitRatios {
  double train = 0.70;
  double valid = 0.15;
  double test = 0.15;
};

struct SplitManifest {
  std::vector<std::string> train;
  std::vector<std::string> valid;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
  // Dataset directory the ids resolve against; not part of the split itself.
  std::string root;
  // Free-form dataset name carried into score reports.
  std::string name;

  const std::vector<std::string>& split(const std::string& which) const;
  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

// Seeded shuffle, then valid and test sizes are floor(n * ratio); the
// remainder goes to train. Throws ConfigError on negative ratios or ratios
// not summing to 1.
SplitManifest split_dataset(std::vector<std::string> ids, const SplitRatios& ratios,
                            std::uint64_t seed);

std::string manifest_to_json(const SplitManifest& m);
SplitManifest manifest_from_json(const std::string& text);
SplitManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const SplitManifest& m);

// One co-registered pre/post pair with its targets. Images are 3 x H x W.
struct Sample {
  std::string id;
  Tensor pre;
  Tensor post;
  MaskPair masks;
};

// Dataset directory layout:
//   images/<id>_pre_disaster.png, images/<id>_post_disaster.png
//   masks/<id>_post_mask.png   damage mask, values 0..4
//   masks/<id>_pre_mask.png    localization mask, values 0..1 (optional;
//                              derived from the damage mask when absent)
std::filesystem::path pre_image_path(const std::filesystem::path& root, const std::string& id);
std::filesystem::path post_image_path(const std::filesystem::path& root, const std::string& id);
std::filesystem::path loc_mask_path(const std::filesystem::path& root, const std::string& id);
std::filesystem::path dmg_mask_path(const std::filesystem::path& root, const std::string& id);

Sample load_sample(const std::filesystem::path& root, const std::string& id);
void save_sample(const std::filesystem::path& root, const Sample& s);

// Sample ids present under root/images, sorted.
std::vector<std::string> list_sample_ids(const std::filesystem::path& root);

}  // namespace bda
