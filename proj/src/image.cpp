#include "mal/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mal/errors.hpp"

namespace mal {

namespace {

void check_dims(int width, int height) {
  if (width < 1 || height < 1) {
    throw InvalidArgument("buffer dimensions must be positive, got " + std::to_string(width) + "x" +
                          std::to_string(height));
  }
}

struct AxisSample {
  int lo;
  int hi;
  double frac;
};

std::vector<AxisSample> axis_samples(int in, int out) {
  std::vector<AxisSample> s(out);
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    double src = (i + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(src));
    s[i] = {lo, std::min(lo + 1, in - 1), src - lo};
  }
  return s;
}

}  // namespace

PixelRect covering_rect(const BBox& box) {
  return {static_cast<int>(std::floor(box.x0)), static_cast<int>(std::floor(box.y0)),
          static_cast<int>(std::ceil(box.x1)), static_cast<int>(std::ceil(box.y1))};
}

Image::Image(int width, int height, int channels, float fill)
    : Image(width, height, channels,
            std::vector<float>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0) *
                                   std::max(channels, 0),
                               fill)) {}

Image::Image(int width, int height, int channels, std::vector<float> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  check_dims(width, height);
  if (channels != 1 && channels != 3) {
    throw InvalidArgument("images have 1 or 3 channels, got " + std::to_string(channels));
  }
  if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw DimensionMismatch("image data length does not match " + std::to_string(width) + "x" +
                            std::to_string(height) + "x" + std::to_string(channels));
  }
  for (float v : data_) {
    if (!(v >= 0.0F && v <= 1.0F)) throw InvalidArgument("image values must lie in [0, 1]");
  }
}

void Image::set(int x, int y, int c, float v) {
  if (!(v >= 0.0F && v <= 1.0F)) throw InvalidArgument("image values must lie in [0, 1]");
  data_[index(x, y, c)] = v;
}

ProbMask::ProbMask(int width, int height, double fill)
    : ProbMask(width, height,
               std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0),
                                   fill)) {}

ProbMask::ProbMask(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  check_dims(width, height);
  if (data_.size() != static_cast<std::size_t>(width) * height) {
    throw DimensionMismatch("mask data length does not match dimensions");
  }
}

BinaryMask::BinaryMask(int width, int height, bool fill)
    : BinaryMask(width, height,
                 std::vector<std::uint8_t>(
                     static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill ? 1 : 0)) {}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  check_dims(width, height);
  if (bits_.size() != static_cast<std::size_t>(width) * height) {
    throw DimensionMismatch("mask data length does not match dimensions");
  }
  for (auto& b : bits_) b = b != 0 ? 1 : 0;
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

namespace {

void check_rect(const PixelRect& r, int width, int height) {
  if (r.width() <= 0 || r.height() <= 0) throw DegenerateBoxError("crop box has zero area");
  if (r.x0 < 0 || r.y0 < 0 || r.x1 > width || r.y1 > height) {
    throw BoundsError("crop box [" + std::to_string(r.x0) + "," + std::to_string(r.y0) + "," +
                      std::to_string(r.x1) + "," + std::to_string(r.y1) + ") exceeds " +
                      std::to_string(width) + "x" + std::to_string(height) + " image");
  }
}

}  // namespace

Image crop(const Image& img, const BBox& box) {
  if (!box.valid()) throw DegenerateBoxError("crop box has zero area");
  return crop(img, covering_rect(box));
}

Image crop(const Image& img, const PixelRect& r) {
  check_rect(r, img.width(), img.height());
  const int c = img.channels();
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(r.width()) * r.height() * c);
  const auto src = img.data();
  for (int y = r.y0; y < r.y1; ++y) {
    const auto row = src.subspan((static_cast<std::size_t>(y) * img.width() + r.x0) * c,
                                 static_cast<std::size_t>(r.width()) * c);
    out.insert(out.end(), row.begin(), row.end());
  }
  return Image(r.width(), r.height(), c, std::move(out));
}

BinaryMask crop(const BinaryMask& mask, const PixelRect& r) {
  check_rect(r, mask.width(), mask.height());
  BinaryMask out(r.width(), r.height());
  for (int y = 0; y < r.height(); ++y) {
    for (int x = 0; x < r.width(); ++x) out.set(x, y, mask.at(x + r.x0, y + r.y0));
  }
  return out;
}

Image resize_bilinear(const Image& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw InvalidArgument("resize target must be at least 1x1");
  const int c = img.channels();
  const auto xs = axis_samples(img.width(), out_w);
  const auto ys = axis_samples(img.height(), out_h);
  std::vector<float> out(static_cast<std::size_t>(out_w) * out_h * c);
  std::size_t k = 0;
  for (int oy = 0; oy < out_h; ++oy) {
    const auto& sy = ys[oy];
    for (int ox = 0; ox < out_w; ++ox) {
      const auto& sx = xs[ox];
      for (int ch = 0; ch < c; ++ch) {
        const double a = img.at(sx.lo, sy.lo, ch);
        const double b = img.at(sx.hi, sy.lo, ch);
        const double d = img.at(sx.lo, sy.hi, ch);
        const double e = img.at(sx.hi, sy.hi, ch);
        const double top = a + sx.frac * (b - a);
        const double bottom = d + sx.frac * (e - d);
        double v = top + sy.frac * (bottom - top);
        v = std::clamp(v, std::min({a, b, d, e}), std::max({a, b, d, e}));
        out[k++] = static_cast<float>(v);
      }
    }
  }
  return Image(out_w, out_h, c, std::move(out));
}

BinaryMask resize_mask(const BinaryMask& mask, int out_w, int out_h) {
  std::vector<float> v(mask.bits().begin(), mask.bits().end());
  const Image as_image(mask.width(), mask.height(), 1, std::move(v));
  const Image resized = resize_bilinear(as_image, out_w, out_h);
  std::vector<std::uint8_t> bits(resized.data().size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = resized.data()[i] >= 0.5F ? 1 : 0;
  return BinaryMask(out_w, out_h, std::move(bits));
}

ProbMask to_prob(const BinaryMask& mask) {
  std::vector<double> v(mask.bits().begin(), mask.bits().end());
  return ProbMask(mask.width(), mask.height(), std::move(v));
}

}  // namespace mal
