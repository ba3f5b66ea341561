#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mal/box.hpp"

namespace mal {

/// Row-major H x W x C pixel buffer with values in [0, 1]. C is 1 or 3.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, float fill = 0.0F);
  /// Takes ownership of `data`; validates length and value range.
  Image(int width, int height, int channels, std::vector<float> data);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const { return data_.empty(); }

  float at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }
  void set(int x, int y, int c, float v);

  std::span<const float> pixel(int x, int y) const {
    return {data_.data() + index(x, y, 0), static_cast<std::size_t>(channels_)};
  }
  std::span<const float> data() const { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Row-major H x W soft mask. Values are kept in double precision so that
/// loss gradients can be checked by finite differences.
class ProbMask {
 public:
  ProbMask() = default;
  ProbMask(int width, int height, double fill = 0.0);
  ProbMask(int width, int height, std::vector<double> data);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const ProbMask& o) const { return width_ == o.width_ && height_ == o.height_; }

  double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  double& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  friend bool operator==(const ProbMask&, const ProbMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Row-major H x W mask of 0/1 values.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false);
  BinaryMask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }

  std::size_t count() const;
  std::span<const std::uint8_t> bits() const { return bits_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Crops the pixels covered by `box` (corners rounded outward).
/// Throws DegenerateBoxError for empty boxes and BoundsError when the
/// covering rectangle leaves the image.
Image crop(const Image& img, const BBox& box);
Image crop(const Image& img, const PixelRect& rect);
BinaryMask crop(const BinaryMask& mask, const PixelRect& rect);

/// Bilinear resampling with half-pixel centers: output sample i reads the
/// input at (i + 0.5) * in / out - 0.5, clamped to the valid range.
Image resize_bilinear(const Image& img, int out_w, int out_h);

/// Resamples a binary mask through bilinear interpolation and a 0.5 cut.
BinaryMask resize_mask(const BinaryMask& mask, int out_w, int out_h);

ProbMask to_prob(const BinaryMask& mask);

}  // namespace mal
