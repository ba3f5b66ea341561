#include "mal/mil.hpp"

#include <algorithm>
#include <cmath>

#include "mal/errors.hpp"

namespace mal {

std::size_t BagSet::positive_count() const {
  return static_cast<std::size_t>(std::count_if(bags.begin(), bags.end(), [](const Bag& b) { return b.positive; }));
}

std::size_t BagSet::negative_count() const { return bags.size() - positive_count(); }

BagSet build_bags(int mask_w, int mask_h, const BBox& gt, const BagOptions& options) {
  if (mask_w < 1 || mask_h < 1) throw InvalidArgument("bag grid must be at least 1x1");
  if (!gt.valid()) throw DegenerateBoxError("ground-truth box in crop is empty");
  const auto hits = [](int k, double lo, double hi) { return k < hi && k + 1 > lo; };

  BagSet set;
  set.mask_w = mask_w;
  set.mask_h = mask_h;
  for (int r = 0; r < mask_h; ++r) {
    const bool pos = hits(r, gt.y0, gt.y1);
    if (!pos && !options.negative_bags) continue;
    Bag bag{{}, pos, Axis::kRow, r};
    bag.pixel_indices.reserve(mask_w);
    for (int c = 0; c < mask_w; ++c) bag.pixel_indices.push_back(static_cast<std::size_t>(r) * mask_w + c);
    set.bags.push_back(std::move(bag));
  }
  for (int c = 0; c < mask_w; ++c) {
    const bool pos = hits(c, gt.x0, gt.x1);
    if (!pos && !options.negative_bags) continue;
    Bag bag{{}, pos, Axis::kColumn, c};
    bag.pixel_indices.reserve(mask_h);
    for (int r = 0; r < mask_h; ++r) bag.pixel_indices.push_back(static_cast<std::size_t>(r) * mask_w + c);
    set.bags.push_back(std::move(bag));
  }
  if (set.positive_count() == 0) throw InvalidArgument("ground-truth box does not intersect the crop");
  if (options.negative_bags && set.negative_count() == 0) {
    throw NoNegativeBagsError("ground-truth box spans the whole crop; no negative bags");
  }
  return set;
}

BagSet build_bags(const CropGeometry& geometry, const BagOptions& options) {
  return build_bags(geometry.crop_w, geometry.crop_h, geometry.gt_box_in_crop, options);
}

LossAndGrad mil_loss(const ProbMask& m, const BagSet& bags) {
  if (m.width() != bags.mask_w || m.height() != bags.mask_h) {
    throw DimensionMismatch("mask and bag set dimensions differ");
  }
  const std::size_t n = bags.bags.size();
  std::vector<double> pmax(n);
  std::vector<std::size_t> arg(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& idx = bags.bags[i].pixel_indices;
    if (idx.empty()) throw InvalidArgument("empty bag");
    // Indices are ascending, so a strict comparison keeps the lowest index on ties.
    std::size_t best = idx.front();
    for (std::size_t k : idx) {
      if (k >= m.size()) throw InvalidArgument("bag index out of range");
      if (m[k] > m[best]) best = k;
    }
    pmax[i] = m[best];
    arg[i] = best;
  }

  double num = 0.0;  // sum g p^2
  double den = 0.0;  // sum p^2 + sum g^2
  for (std::size_t i = 0; i < n; ++i) {
    const double g = bags.bags[i].positive ? 1.0 : 0.0;
    const double p2 = pmax[i] * pmax[i];
    num += g * p2;
    den += p2 + g * g;
  }
  if (den == 0.0) throw UndefinedDiceError("MIL dice denominator is zero");

  LossAndGrad out{1.0 - 2.0 * num / den, ProbMask(m.width(), m.height())};
  // dL/dp_i = (4 p_i (num - g_i den)) / den^2
  for (std::size_t i = 0; i < n; ++i) {
    const double g = bags.bags[i].positive ? 1.0 : 0.0;
    out.grad[arg[i]] += 4.0 * pmax[i] * (num - g * den) / (den * den);
  }
  return out;
}

}  // namespace mal
