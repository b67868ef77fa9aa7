#include "segadv/attacks/targets.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>

#include "segadv/error.hpp"

namespace segadv::attacks {

LabelMask least_likely_targets(const segnet::ScoreVolume& scores) {
  const auto& probs = scores.probs;
  if (probs.rank() != 3) throw ShapeError("least_likely_targets: expected H x W x N scores");
  const std::size_t n = probs.dim(2);
  LabelMask mask(probs.dim(0), probs.dim(1));
  auto pv = probs.values();
  for (std::size_t p = 0; p < mask.size(); ++p) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < n; ++c) {
      if (pv[p * n + c] < pv[p * n + best]) best = c;
    }
    mask.classes[p] = static_cast<int>(best);
  }
  return mask;
}

LabelMask build_dnnm_target(const LabelMask& mask, int objective_class) {
  if (std::none_of(mask.classes.begin(), mask.classes.end(), [&](int c) { return c != objective_class; })) {
    throw UsageError("DNNM target: every pixel belongs to objective class " + std::to_string(objective_class) +
                     ", no donor class exists");
  }
  const auto h = static_cast<std::ptrdiff_t>(mask.height);
  const auto w = static_cast<std::ptrdiff_t>(mask.width);
  const std::ptrdiff_t max_radius = std::max(h, w);
  LabelMask out = mask;

  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      if (mask.classes[static_cast<std::size_t>(y * w + x)] != objective_class) continue;
      // Expand Chebyshev rings; a ring of radius r only holds squared
      // distances >= r^2, so the search ends once r^2 exceeds the best found.
      std::ptrdiff_t best_d2 = std::numeric_limits<std::ptrdiff_t>::max();
      std::ptrdiff_t best_idx = -1;
      for (std::ptrdiff_t r = 1; r <= max_radius && r * r <= best_d2; ++r) {
        for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
          const std::ptrdiff_t yy = y + dy;
          if (yy < 0 || yy >= h) continue;
          const bool edge_row = std::abs(dy) == r;
          const std::ptrdiff_t step = edge_row ? 1 : 2 * r;
          for (std::ptrdiff_t dx = -r; dx <= r; dx += step) {
            const std::ptrdiff_t xx = x + dx;
            if (xx < 0 || xx >= w) continue;
            const std::ptrdiff_t idx = yy * w + xx;
            if (mask.classes[static_cast<std::size_t>(idx)] == objective_class) continue;
            const std::ptrdiff_t d2 = dy * dy + dx * dx;
            if (d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
              best_d2 = d2;
              best_idx = idx;
            }
          }
        }
      }
      out.classes[static_cast<std::size_t>(y * w + x)] = mask.classes[static_cast<std::size_t>(best_idx)];
    }
  }
  return out;
}

}  // namespace segadv::attacks
