#pragma once

#include <cstdint>
#include <vector>

#include "mal/image.hpp"

namespace mal {

/// Token grid of feature vectors, row-major with `dim` values per token.
struct FeatureField {
  int width = 0;
  int height = 0;
  int dim = 0;
  std::vector<double> data;

  std::size_t token_count() const { return static_cast<std::size_t>(width) * height; }
  const double* token(std::size_t i) const { return data.data() + i * static_cast<std::size_t>(dim); }
};

/// Per-token foreground flag on the same grid as a FeatureField.
struct ClusterAssignment {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> foreground;
};

/// Downsamples a pixel mask to a token grid by majority vote over the
/// pixels under each token cell (ties count as background).
ClusterAssignment assignment_from_mask(const BinaryMask& mask, int grid_w, int grid_h);

/// Mean over tokens of |f_i / |f_i| - c_g / |c_g||^2, where c_1 and c_0
/// are the means of the raw foreground and background vectors and g is
/// the token's group. Throws NormalizationError on zero-norm tokens or
/// centres and InvalidArgument when a group is empty.
double clustering_score(const FeatureField& features, const ClusterAssignment& assign);

/// |a and b| / |a or b|; 1 when both are empty.
double mask_iou(const BinaryMask& a, const BinaryMask& b);
/// 2 |a and b| / (|a| + |b|); 1 when both are empty.
double mask_dice(const BinaryMask& a, const BinaryMask& b);

/// Box-supervised AP over fully supervised AP, as a percentage.
double retention(double box_sup_ap, double full_sup_ap);

/// Fraction of set bits of `mask` inside the pixel cells overlapping `box`.
double foreground_fraction(const BinaryMask& mask, const BBox& box);

}  // namespace mal
