#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "bda/mask.hpp"

namespace bda {

// Pixel counts for the two scoring tasks. Damage rows are indexed by the
// ground-truth level (L1..L4), columns by the predicted value 0..4, where
// column 0 means the model predicted background at a building pixel. Only
// ground-truth building pixels enter the damage matrix.
struct ConfusionMatrix {
  std::uint64_t loc_tp = 0, loc_fp = 0, loc_fn = 0, loc_tn = 0;
  std::array<std::array<std::uint64_t, kMaxDamageValue + 1>, kDamageClasses> dmg{};

  // Adds one sample. Throws ContractError on shape or value violations.
  void accumulate(const Mask& pred_loc, const Mask& pred_dmg, const MaskPair& gt);
  ConfusionMatrix& merge(const ConfusionMatrix& other);
  std::uint64_t building_pixels() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// Scores are fractions in [0, 1]; serialization converts them to percent.
struct ScoreReport {
  double f1_loc = 0.0;
  std::array<double, kDamageClasses> f1_levels{};
  double f1_clf = 0.0;
  double f1_oa = 0.0;
  std::size_t samples = 0;
  std::string variant;
  std::string dataset;
};

// F1 = 2TP / (2TP + FP + FN), 0 when the denominator is 0.
double f1_score(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn);

// Per-class damage F1 treats a background prediction at a building pixel as
// a miss for the true class without charging a false positive to any class.
// f1_clf is the harmonic mean of the four levels (0 if any level is 0);
// f1_oa = 0.3 f1_loc + 0.7 f1_clf.
ScoreReport compute_scores(const ConfusionMatrix& cm, std::size_t samples = 0);

inline constexpr double kLocWeight = 0.3;
inline constexpr double kClfWeight = 0.7;

// One JSON object, fixed key order, scores in percent with 4 decimals:
// {"f1_loc":"84.8600","f1_clf":...,"f1_oa":...,"f1_l1":...,...,"f1_l4":...,
//  "samples":N,"variant":"...","dataset":"..."}
std::string serialize_report(const ScoreReport& r);
ScoreReport parse_report(const std::string& json_text);

// CSV header and row for sweep output, same fields as the JSON report.
std::string report_csv_header();
std::string report_csv_row(const ScoreReport& r);

// Percent string with 4 decimals, e.g. 0.8486 -> "84.8600".
std::string percent4(double fraction);

}  // namespace bda
