#include "bda/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "bda/errors.hpp"

namespace bda::synthetic {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Random rectangle of side [lo, hi] inside the cell [cx, cx+cell) x [cy, cy+cell)
// keeping a one-pixel margin.
Building place(Rng& rng, std::size_t cx, std::size_t cy, std::size_t cell, std::size_t lo,
               std::size_t hi, std::uint8_t level) {
  hi = std::min(hi, cell - 2);
  lo = std::min(lo, hi);
  const auto bw = lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
  const auto bh = lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
  const auto ox = 1 + static_cast<std::size_t>(rng.below(cell - 2 - bw + 1));
  const auto oy = 1 + static_cast<std::size_t>(rng.below(cell - 2 - bh + 1));
  return {cx + ox, cy + oy, cx + ox + bw, cy + oy + bh, level};
}

}  // namespace

Style domain_style(int domain) {
  Style s;
  if (domain % 2 == 1) {
    s.background = {0.62, 0.55, 0.38};
    s.roof = {0.66, 0.30, 0.26};
    s.damaged_roof = {{{0.66, 0.30, 0.26},
                       {0.80, 0.62, 0.30},
                       {0.38, 0.36, 0.70},
                       {0.20, 0.16, 0.10}}};
    s.noise = 0.05;
    s.post_shift_x = 1;
  }
  return s;
}

Sample render_sample(const std::string& id, std::size_t size,
                     const std::vector<Building>& buildings, const Style& style, Rng& rng) {
  Sample s;
  s.id = id;
  s.pre = Tensor({3, size, size});
  s.post = Tensor({3, size, size});
  s.masks.loc = Mask(size, size);
  s.masks.dmg = Mask(size, size);
  const std::size_t hw = size * size;
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t p = 0; p < hw; ++p) {
      s.pre[c * hw + p] = style.background[c];
    }
  }
  for (const auto& b : buildings) {
    if (b.level < 1 || b.level > 4 || b.x1 > size || b.y1 > size) {
      throw ConfigError("synthetic building outside the image or with a bad level");
    }
    for (std::size_t y = b.y0; y < b.y1; ++y) {
      for (std::size_t x = b.x0; x < b.x1; ++x) {
        for (std::size_t c = 0; c < 3; ++c) s.pre[c * hw + y * size + x] = style.roof[c];
        s.masks.loc.at(y, x) = 1;
        s.masks.dmg.at(y, x) = b.level;
      }
    }
  }
  // Post image: same scene, damaged roofs recolored, optionally shifted.
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const long sx = std::clamp<long>(static_cast<long>(x) - style.post_shift_x, 0,
                                         static_cast<long>(size) - 1);
        const std::size_t src = y * size + static_cast<std::size_t>(sx);
        const std::uint8_t lvl = s.masks.dmg.values[src];
        s.post[c * hw + y * size + x] =
            lvl > 0 ? style.damaged_roof[lvl - 1][c] : s.pre[c * hw + src];
      }
    }
  }
  for (std::size_t i = 0; i < s.pre.numel(); ++i) {
    s.pre[i] = clamp01(s.pre[i] + style.noise * rng.normal());
    s.post[i] = clamp01(s.post[i] + style.noise * rng.normal());
  }
  return s;
}

std::vector<Sample> overfit_fixture(std::size_t count, std::size_t size, std::uint64_t seed,
                                    const Style& style) {
  Rng rng(seed);
  std::vector<Sample> out;
  const std::size_t cell = size / 2;
  for (std::size_t i = 0; i < count; ++i) {
    std::array<std::uint8_t, 4> levels{1, 2, 3, 4};
    shuffle(levels.begin(), levels.end(), rng);
    std::vector<Building> bs;
    for (std::size_t q = 0; q < 4; ++q) {
      bs.push_back(place(rng, (q % 2) * cell, (q / 2) * cell, cell, cell / 2, cell - 4,
                         levels[q]));
    }
    out.push_back(render_sample("overfit_" + std::to_string(i), size, bs, style, rng));
  }
  return out;
}

Style imbalance_style() {
  Style s;
  // Minor-to-major damage leaves the roof almost intact: the L3 post color
  // sits close to the undamaged roof, so the minority class is hard.
  s.damaged_roof[2] = {0.64, 0.66, 0.76};
  return s;
}

std::vector<Sample> imbalanced_fixture(std::size_t count, std::size_t size,
                                       std::uint64_t seed, double majority_ratio,
                                       const Style& style) {
  Rng rng(seed);
  constexpr std::size_t kCell = 8;
  const std::size_t cells = size / kCell;
  // A grid of small buildings per image; a shuffled subset becomes L3 until
  // the majority:minority pixel ratio reaches the target.
  std::vector<std::vector<Building>> scenes(count);
  double total_px = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> refs;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t cy = 0; cy < cells; ++cy) {
      for (std::size_t cx = 0; cx < cells; ++cx) {
        scenes[i].push_back(place(rng, cx * kCell, cy * kCell, kCell, 3, 6, 1));
        const auto& b = scenes[i].back();
        total_px += static_cast<double>((b.x1 - b.x0) * (b.y1 - b.y0));
        refs.emplace_back(i, scenes[i].size() - 1);
      }
    }
  }
  shuffle(refs.begin(), refs.end(), rng);
  const double minority_target = total_px / (majority_ratio + 1.0);
  double minority_px = 0.0;
  for (const auto& [i, k] : refs) {
    Building& b = scenes[i][k];
    const double px = static_cast<double>((b.x1 - b.x0) * (b.y1 - b.y0));
    if (minority_px + px / 2 > minority_target) break;
    b.level = 3;
    minority_px += px;
  }
  std::vector<Sample> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(render_sample("imbalanced_" + std::to_string(i), size, scenes[i], style, rng));
  }
  return out;
}

std::vector<Sample> domain_fixture(int domain, std::size_t count, std::size_t size,
                                   std::uint64_t seed) {
  Rng rng(seed);
  const Style style = domain_style(domain);
  const std::size_t cell = size / 2;
  std::vector<Sample> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<Building> bs;
    for (std::size_t q = 0; q < 4; ++q) {
      // Skewed level mix: no-damage is the most common.
      const double u = rng.uniform();
      const std::uint8_t level = u < 0.4 ? 1 : u < 0.6 ? 2 : u < 0.8 ? 3 : 4;
      bs.push_back(place(rng, (q % 2) * cell, (q / 2) * cell, cell, cell / 2, cell - 3, level));
    }
    out.push_back(render_sample("domain" + std::to_string(domain) + "_" + std::to_string(i),
                                size, bs, style, rng));
  }
  return out;
}

}  // namespace bda::synthetic
