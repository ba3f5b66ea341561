#pragma once

#include <optional>

#include "mal/box.hpp"
#include "mal/image.hpp"
#include "mal/rng.hpp"

namespace mal {

struct ExpansionParams {
  /// Upper bound of the per-axis expansion rate.
  double theta = 1.2;
};

/// The four uniform draws that determine one expansion.
struct ExpansionDraws {
  double theta_x = 0.0;  // in [0, theta]
  double theta_y = 0.0;  // in [0, theta]
  double beta_x = 0.0;   // in [0, theta_x], left side
  double beta_y = 0.0;   // in [0, theta_y], top side
};

/// An expanded box b' with the rates that produced it.
///
/// Each corner moves away from the box center by its side's rate:
///   x0' = xc + (1 + beta_x)  * (x0 - xc)
///   x1' = xc + (1 + beta_x') * (x1 - xc)
/// and likewise for y, with beta_x' = theta_x - beta_x.
struct ExpandedBBox {
  BBox box;
  double beta_x = 0.0;
  double beta_x_prime = 0.0;
  double beta_y = 0.0;
  double beta_y_prime = 0.0;
  double theta_x = 0.0;
  double theta_y = 0.0;
  /// True when clip_to_image moved any side of `box`.
  bool clipped = false;
};

ExpansionDraws draw_expansion(const ExpansionParams& params, CounterRng& rng);
ExpandedBBox expand_box(const BBox& b, const ExpansionDraws& draws);
ExpandedBBox expand_box(const BBox& b, const ExpansionParams& params, CounterRng& rng);

/// Clips b' to [0, width] x [0, height]. The rates are kept as drawn, so
/// the symmetric budget no longer describes the box after clipping.
ExpandedBBox clip_to_image(ExpandedBBox e, int width, int height);

/// Geometry of one RoI: where it came from in the untrimmed image and
/// where the ground-truth box lands after crop and resize.
struct CropGeometry {
  ExpandedBBox expanded;
  /// Pixel rectangle actually cut from the untrimmed image.
  PixelRect source;
  int crop_w = 0;
  int crop_h = 0;
  BBox gt_box_in_crop;

  double scale_x() const { return static_cast<double>(crop_w) / source.width(); }
  double scale_y() const { return static_cast<double>(crop_h) / source.height(); }
  /// Image -> crop coordinates.
  BBox to_crop(const BBox& b) const;
  /// Crop -> image coordinates.
  BBox to_image(const BBox& b) const;
};

struct RoiSample {
  Image input;
  CropGeometry geometry;
};

/// Builds the geometry for an already drawn expansion (no image access).
CropGeometry crop_geometry(const BBox& b, const ExpandedBBox& expanded, int image_w, int image_h, int crop_w,
                           int crop_h);

/// Expands `b`, clips to the image, crops the covering pixels and resizes
/// them to crop_w x crop_h.
RoiSample make_crop_geometry(const BBox& b, const Image& img, const ExpansionParams& params, int crop_w,
                             int crop_h, CounterRng& rng);
RoiSample make_crop_geometry(const BBox& b, const Image& img, const ExpansionDraws& draws, int crop_w,
                             int crop_h);

/// Negative-crop sampling: a box of the same size as `b` drawn uniformly
/// inside the image that does not intersect `b`. Returns nullopt when no
/// such placement is found within `attempts` draws.
std::optional<BBox> sample_background_box(const BBox& b, int image_w, int image_h, CounterRng& rng,
                                          int attempts = 64);

}  // namespace mal
