#pragma once

#include <cstddef>
#include <vector>

#include "mal/box.hpp"
#include "mal/image.hpp"
#include "mal/roi.hpp"

namespace mal {

enum class Axis { kRow, kColumn };

/// One MIL bag: every pixel of a crop row or column.
struct Bag {
  std::vector<std::size_t> pixel_indices;
  bool positive = false;
  Axis axis = Axis::kRow;
  int ordinate = 0;
};

struct BagSet {
  std::vector<Bag> bags;
  int mask_w = 0;
  int mask_h = 0;

  std::size_t positive_count() const;
  std::size_t negative_count() const;
};

struct BagOptions {
  /// Keep rows and columns that miss the ground-truth box. Turning this
  /// off is an ablation that reproduces training without background bags.
  bool negative_bags = true;
};

/// Rows and columns of a w x h crop. Row r is positive iff [r, r+1)
/// intersects [gt.y0, gt.y1); columns likewise on x. Rows come first,
/// then columns. Throws NoNegativeBagsError when the box covers the whole
/// crop and negative bags are requested.
BagSet build_bags(int mask_w, int mask_h, const BBox& gt_box_in_crop, const BagOptions& options = {});
BagSet build_bags(const CropGeometry& geometry, const BagOptions& options = {});

struct LossAndGrad {
  double loss = 0.0;
  ProbMask grad;
};

/// Max-pooled squared dice over bags:
///   L = 1 - 2 sum g_i p_i^2 / (sum p_i^2 + sum g_i^2),   p_i = max over B_i.
/// The subgradient of each max goes to a single pixel, the lowest flat
/// index among ties.
LossAndGrad mil_loss(const ProbMask& m, const BagSet& bags);

}  // namespace mal
