#pragma once

#include <ostream>

namespace mal {

/// Axis-aligned box in continuous pixel coordinates. (x0, y0) is the
/// top-left corner and (x1, y1) the bottom-right corner; pixel (c, r)
/// covers [c, c+1) x [r, r+1).
struct BBox {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double center_x() const { return 0.5 * (x0 + x1); }
  double center_y() const { return 0.5 * (y0 + y1); }
  bool valid() const { return x0 < x1 && y0 < y1; }

  bool contains(const BBox& other) const {
    return x0 <= other.x0 && y0 <= other.y0 && x1 >= other.x1 && y1 >= other.y1;
  }

  BBox translated(double dx, double dy) const { return {x0 + dx, y0 + dy, x1 + dx, y1 + dy}; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const BBox& b) {
  return os << "(" << b.x0 << ", " << b.y0 << ", " << b.x1 << ", " << b.y1 << ")";
}

/// Integer pixel rectangle [x0, x1) x [y0, y1) covering a continuous box:
/// the top-left corner is rounded down and the bottom-right corner up.
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }

  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

PixelRect covering_rect(const BBox& box);

}  // namespace mal
