#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace bda {

// H x W label image. Localization masks hold {0, 1}; damage masks hold
// {0 background, 1 no-damage, 2 minor, 3 major, 4 destroyed}.
struct Mask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> values;

  Mask() = default;
  Mask(std::size_t h, std::size_t w, std::uint8_t fill = 0)
      : height(h), width(w), values(h * w, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  std::size_t size() const { return values.size(); }

  friend bool operator==(const Mask&, const Mask&) = default;
};

inline constexpr std::uint8_t kMaxDamageValue = 4;
inline constexpr std::size_t kDamageClasses = 4;

struct MaskPair {
  Mask loc;
  Mask dmg;

  // Throws DataError when shapes differ, a value is out of range, or a
  // damaged pixel is not marked as building.
  void validate() const;

  friend bool operator==(const MaskPair&, const MaskPair&) = default;
};

// Localization mask implied by a damage mask (building wherever dmg > 0).
Mask loc_from_dmg(const Mask& dmg);

// Fraction of pixels where a and b hold the same value. Throws ContractError
// on a shape mismatch.
double pixel_agreement(const Mask& a, const Mask& b);

}  // namespace bda
