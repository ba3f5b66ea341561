#include "mal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mal/errors.hpp"
#include "mal/rng.hpp"

namespace mal::synth {

namespace {

double color_distance(const Rgb& a, const Rgb& b) {
  double d2 = 0.0;
  for (int c = 0; c < 3; ++c) d2 += (a[c] - b[c]) * (a[c] - b[c]);
  return std::sqrt(d2);
}

bool inside_shape(const SceneSpec& s, double cx, double cy) {
  const BBox& e = s.extent;
  switch (s.shape) {
    case Shape::kRect:
      return cx > e.x0 && cx < e.x1 && cy > e.y0 && cy < e.y1;
    case Shape::kEllipse: {
      const double u = (cx - e.center_x()) / (0.5 * e.width());
      const double v = (cy - e.center_y()) / (0.5 * e.height());
      return u * u + v * v <= 1.0;
    }
    case Shape::kLShape: {
      if (!(cx > e.x0 && cx < e.x1 && cy > e.y0 && cy < e.y1)) return false;
      double u = (cx - e.x0) / e.width();
      double v = (cy - e.y0) / e.height();
      if (s.orientation & 1) u = 1.0 - u;
      if (s.orientation & 2) v = 1.0 - v;
      return u < s.arm_fraction || v > 1.0 - s.arm_fraction;
    }
  }
  return false;
}

}  // namespace

std::string_view to_string(Shape s) {
  switch (s) {
    case Shape::kRect:
      return "rect";
    case Shape::kEllipse:
      return "ellipse";
    case Shape::kLShape:
      return "l-shape";
  }
  return "rect";
}

Shape shape_from_string(std::string_view s) {
  if (s == "rect") return Shape::kRect;
  if (s == "ellipse") return Shape::kEllipse;
  if (s == "l-shape" || s == "L" || s == "lshape") return Shape::kLShape;
  throw InvalidArgument("unknown shape '" + std::string(s) + "'");
}

void SceneSpec::validate() const {
  if (width < 1 || height < 1) throw InvalidArgument("scene must be at least 1x1");
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise sigma must be >= 0");
  if (!(color_distance(fg_color, bg_color) > 4.0 * noise_sigma)) {
    throw InvalidArgument("foreground and background colours are not separable at this noise level");
  }
  for (int c = 0; c < 3; ++c) {
    if (!(fg_color[c] >= 0.0F && fg_color[c] <= 1.0F && bg_color[c] >= 0.0F && bg_color[c] <= 1.0F)) {
      throw InvalidArgument("colours must lie in [0, 1]");
    }
  }
  if (!extent.valid() || extent.x0 < 0 || extent.y0 < 0 || extent.x1 > width || extent.y1 > height) {
    throw InvalidArgument("shape extent must be a non-empty box inside the image");
  }
  if (!(arm_fraction > 0.0 && arm_fraction < 1.0)) throw InvalidArgument("arm fraction must lie in (0, 1)");
  if (distractor_count < 0) throw InvalidArgument("distractor count must be >= 0");
}

BBox tight_box(const BinaryMask& mask) {
  int x0 = mask.width();
  int y0 = mask.height();
  int x1 = 0;
  int y1 = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x + 1);
      y1 = std::max(y1, y + 1);
    }
  }
  if (x1 == 0) return {};
  return {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1), static_cast<double>(y1)};
}

Scene generate(const SceneSpec& spec) {
  spec.validate();
  CounterRng rng(spec.seed);
  CounterRng layout = rng.split(1);
  CounterRng noise = rng.split(2);

  const int w = spec.width;
  const int h = spec.height;
  BinaryMask mask(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) mask.set(x, y, inside_shape(spec, x + 0.5, y + 0.5));
  }
  const BBox box = tight_box(mask);
  if (!box.valid()) throw DegenerateBoxError("shape covers no pixel centre");

  std::vector<Rgb> colors(static_cast<std::size_t>(w) * h, spec.bg_color);
  for (std::size_t i = 0; i < colors.size(); ++i) {
    if (mask[i]) colors[i] = spec.fg_color;
  }

  for (int d = 0; d < spec.distractor_count; ++d) {
    const int side = std::max(2, std::min(w, h) / 10);
    Rgb col;
    do {
      col = {static_cast<float>(layout.uniform()), static_cast<float>(layout.uniform()),
             static_cast<float>(layout.uniform())};
    } while (color_distance(col, spec.bg_color) <= 4.0 * spec.noise_sigma);
    for (int attempt = 0; attempt < 32; ++attempt) {
      if (w - side < 0 || h - side < 0) break;
      const int x0 = static_cast<int>(layout.below(static_cast<std::uint64_t>(w - side + 1)));
      const int y0 = static_cast<int>(layout.below(static_cast<std::uint64_t>(h - side + 1)));
      const bool clear = x0 + side <= box.x0 || x0 >= box.x1 || y0 + side <= box.y0 || y0 >= box.y1;
      if (!clear) continue;
      for (int y = y0; y < y0 + side; ++y) {
        for (int x = x0; x < x0 + side; ++x) colors[static_cast<std::size_t>(y) * w + x] = col;
      }
      break;
    }
  }

  std::vector<float> data(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < colors.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      double v = colors[i][c];
      if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise.normal();
      data[i * 3 + c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return {Image(w, h, 3, std::move(data)), std::move(mask), box};
}

SceneSpec random_spec(std::uint64_t seed, int size, double noise_sigma, double min_color_distance) {
  CounterRng rng = CounterRng(seed).split(0xC0FFEE);
  SceneSpec s;
  s.width = size;
  s.height = size;
  s.seed = seed;
  s.noise_sigma = noise_sigma;
  s.shape = static_cast<Shape>(rng.below(3));
  const double ew = size * rng.uniform(0.3, 0.5);
  const double eh = size * rng.uniform(0.3, 0.5);
  const double pad = 0.15 * size;
  const double x0 = std::round(rng.uniform(pad, size - pad - ew));
  const double y0 = std::round(rng.uniform(pad, size - pad - eh));
  s.extent = {x0, y0, x0 + std::round(ew), y0 + std::round(eh)};
  s.arm_fraction = rng.uniform(0.35, 0.5);
  s.orientation = static_cast<int>(rng.below(4));
  // Colours are corners of the RGB cube, so every pair is at least 1 apart.
  const auto corner = [](std::uint64_t k) {
    return Rgb{static_cast<float>(k & 1), static_cast<float>((k >> 1) & 1), static_cast<float>((k >> 2) & 1)};
  };
  do {
    s.fg_color = corner(rng.below(8));
    s.bg_color = corner(rng.below(8));
  } while (color_distance(s.fg_color, s.bg_color) < min_color_distance);
  s.distractor_count = static_cast<int>(rng.below(3));
  return s;
}

}  // namespace mal::synth
