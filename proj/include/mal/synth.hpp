#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "mal/box.hpp"
#include "mal/image.hpp"

namespace mal::synth {

enum class Shape { kRect, kEllipse, kLShape };

std::string_view to_string(Shape s);
Shape shape_from_string(std::string_view s);

using Rgb = std::array<float, 3>;

struct SceneSpec {
  int width = 64;
  int height = 64;
  Shape shape = Shape::kRect;
  /// Region the shape is drawn into; the rendered mask's tight box may be
  /// smaller for ellipses.
  BBox extent{16, 16, 48, 48};
  Rgb fg_color{1.0F, 0.0F, 0.0F};
  Rgb bg_color{0.0F, 1.0F, 0.0F};
  double noise_sigma = 0.05;
  int distractor_count = 0;
  /// L-shape arm thickness as a fraction of the extent, in (0, 1).
  double arm_fraction = 0.4;
  /// Quarter turns applied to the L-shape, 0..3.
  int orientation = 0;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument unless the colours are separable
  /// (distance > 4 sigma) and the extent lies inside the image.
  void validate() const;
};

struct Scene {
  Image image;
  BinaryMask mask;
  BBox box;  // tight box of `mask`
};

/// Renders the shape on the background, adds distractor squares that
/// stay clear of the object box, then Gaussian noise clamped to [0, 1].
/// Throws DegenerateBoxError when the shape covers no pixel centre.
Scene generate(const SceneSpec& spec);

/// Scene parameters for the seeded recovery suite: a random shape of a
/// random size placed at a random position, saturated colours at least
/// `min_color_distance` apart.
SceneSpec random_spec(std::uint64_t seed, int size = 64, double noise_sigma = 0.05,
                      double min_color_distance = 1.0);

/// Tight bounding box of the set bits, or an invalid box when empty.
BBox tight_box(const BinaryMask& mask);

}  // namespace mal::synth
