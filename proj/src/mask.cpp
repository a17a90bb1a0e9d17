#include "bda/mask.hpp"

#include <string>

#include "bda/errors.hpp"

namespace bda {

void MaskPair::validate() const {
  if (loc.height != dmg.height || loc.width != dmg.width) {
    throw DataError("mask pair shape mismatch");
  }
  for (std::size_t i = 0; i < loc.size(); ++i) {
    if (loc.values[i] > 1) {
      throw DataError("localization mask value " + std::to_string(loc.values[i]) +
                      " outside {0,1}");
    }
    if (dmg.values[i] > kMaxDamageValue) {
      throw DataError("damage mask value " + std::to_string(dmg.values[i]) +
                      " outside {0..4}");
    }
    if (dmg.values[i] > 0 && loc.values[i] != 1) {
      throw DataError("damaged pixel " + std::to_string(i) + " not marked as building");
    }
  }
}

Mask loc_from_dmg(const Mask& dmg) {
  Mask loc(dmg.height, dmg.width);
  for (std::size_t i = 0; i < dmg.size(); ++i) loc.values[i] = dmg.values[i] > 0 ? 1 : 0;
  return loc;
}

double pixel_agreement(const Mask& a, const Mask& b) {
  if (a.height != b.height || a.width != b.width) {
    throw ContractError("pixel_agreement: shape mismatch " + std::to_string(a.height) +
                        "x" + std::to_string(a.width) + " vs " +
                        std::to_string(b.height) + "x" + std::to_string(b.width));
  }
  if (a.size() == 0) return 1.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a.values[i] == b.values[i];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

}  // namespace bda
