#include "mal/roi.hpp"

#include <algorithm>
#include <cmath>

#include "mal/errors.hpp"

namespace mal {

namespace {

// Rates live on a 2^-40 grid so theta - beta is exact and the budget sums back exactly.
constexpr double kRateGrid = 0x1p40;
constexpr double kMaxGridRate = 0x1p12;

double snap_rate(double v) { return v < kMaxGridRate ? std::round(v * kRateGrid) / kRateGrid : v; }

}  // namespace

ExpansionDraws draw_expansion(const ExpansionParams& params, CounterRng& rng) {
  if (!(params.theta >= 0.0)) throw InvalidArgument("expansion bound theta must be >= 0");
  ExpansionDraws d;
  d.theta_x = std::min(snap_rate(rng.uniform(0.0, params.theta)), params.theta);
  d.theta_y = std::min(snap_rate(rng.uniform(0.0, params.theta)), params.theta);
  d.beta_x = std::min(snap_rate(rng.uniform(0.0, d.theta_x)), d.theta_x);
  d.beta_y = std::min(snap_rate(rng.uniform(0.0, d.theta_y)), d.theta_y);
  return d;
}

ExpandedBBox expand_box(const BBox& b, const ExpansionDraws& d) {
  if (!b.valid()) throw DegenerateBoxError("cannot expand an empty box");
  ExpandedBBox e;
  e.theta_x = snap_rate(d.theta_x);
  e.theta_y = snap_rate(d.theta_y);
  e.beta_x = snap_rate(d.beta_x);
  e.beta_y = snap_rate(d.beta_y);
  if (e.beta_x < 0 || e.beta_y < 0 || e.beta_x > e.theta_x || e.beta_y > e.theta_y) {
    throw InvalidArgument("expansion rates must satisfy 0 <= beta <= theta");
  }
  e.beta_x_prime = e.theta_x - e.beta_x;
  e.beta_y_prime = e.theta_y - e.beta_y;
  const double xc = b.center_x();
  const double yc = b.center_y();
  // corner + beta * (corner - center) equals center + (1 + beta) * (corner - center)
  // but keeps a zero rate exact and never rounds inside the original box.
  e.box = {b.x0 + e.beta_x * (b.x0 - xc), b.y0 + e.beta_y * (b.y0 - yc), b.x1 + e.beta_x_prime * (b.x1 - xc),
           b.y1 + e.beta_y_prime * (b.y1 - yc)};
  return e;
}

ExpandedBBox expand_box(const BBox& b, const ExpansionParams& params, CounterRng& rng) {
  return expand_box(b, draw_expansion(params, rng));
}

ExpandedBBox clip_to_image(ExpandedBBox e, int width, int height) {
  const BBox before = e.box;
  e.box.x0 = std::clamp(e.box.x0, 0.0, static_cast<double>(width));
  e.box.x1 = std::clamp(e.box.x1, 0.0, static_cast<double>(width));
  e.box.y0 = std::clamp(e.box.y0, 0.0, static_cast<double>(height));
  e.box.y1 = std::clamp(e.box.y1, 0.0, static_cast<double>(height));
  e.clipped = !(before == e.box);
  return e;
}

BBox CropGeometry::to_crop(const BBox& b) const {
  const double sx = scale_x();
  const double sy = scale_y();
  return {(b.x0 - source.x0) * sx, (b.y0 - source.y0) * sy, (b.x1 - source.x0) * sx, (b.y1 - source.y0) * sy};
}

BBox CropGeometry::to_image(const BBox& b) const {
  const double sx = scale_x();
  const double sy = scale_y();
  return {b.x0 / sx + source.x0, b.y0 / sy + source.y0, b.x1 / sx + source.x0, b.y1 / sy + source.y0};
}

CropGeometry crop_geometry(const BBox& b, const ExpandedBBox& expanded, int image_w, int image_h, int crop_w,
                           int crop_h) {
  if (crop_w < 1 || crop_h < 1) throw InvalidArgument("crop size must be at least 1x1");
  if (b.x0 < 0 || b.y0 < 0 || b.x1 > image_w || b.y1 > image_h) {
    throw BoundsError("ground-truth box lies outside the image");
  }
  CropGeometry g;
  g.expanded = clip_to_image(expanded, image_w, image_h);
  g.source = covering_rect(g.expanded.box);
  g.crop_w = crop_w;
  g.crop_h = crop_h;
  BBox mapped = g.to_crop(b);
  mapped.x0 = std::clamp(mapped.x0, 0.0, static_cast<double>(crop_w));
  mapped.x1 = std::clamp(mapped.x1, 0.0, static_cast<double>(crop_w));
  mapped.y0 = std::clamp(mapped.y0, 0.0, static_cast<double>(crop_h));
  mapped.y1 = std::clamp(mapped.y1, 0.0, static_cast<double>(crop_h));
  g.gt_box_in_crop = mapped;
  return g;
}

RoiSample make_crop_geometry(const BBox& b, const Image& img, const ExpansionDraws& draws, int crop_w,
                             int crop_h) {
  const ExpandedBBox e = expand_box(b, draws);
  CropGeometry g = crop_geometry(b, e, img.width(), img.height(), crop_w, crop_h);
  Image trimmed = crop(img, g.source);
  Image input = (trimmed.width() == crop_w && trimmed.height() == crop_h)
                    ? std::move(trimmed)
                    : resize_bilinear(trimmed, crop_w, crop_h);
  return {std::move(input), g};
}

RoiSample make_crop_geometry(const BBox& b, const Image& img, const ExpansionParams& params, int crop_w,
                             int crop_h, CounterRng& rng) {
  return make_crop_geometry(b, img, draw_expansion(params, rng), crop_w, crop_h);
}

std::optional<BBox> sample_background_box(const BBox& b, int image_w, int image_h, CounterRng& rng,
                                          int attempts) {
  const double w = b.width();
  const double h = b.height();
  if (w > image_w || h > image_h) return std::nullopt;
  for (int i = 0; i < attempts; ++i) {
    const double x0 = rng.uniform(0.0, image_w - w);
    const double y0 = rng.uniform(0.0, image_h - h);
    const BBox cand{x0, y0, x0 + w, y0 + h};
    const bool disjoint = cand.x1 <= b.x0 || cand.x0 >= b.x1 || cand.y1 <= b.y0 || cand.y0 >= b.y1;
    if (disjoint) return cand;
  }
  return std::nullopt;
}

}  // namespace mal
