#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mal/image.hpp"

namespace mal::io {

/// Uninterpreted contents of a native float file.
///
/// Layout: magic "MALF", then width, height, channels as little-endian
/// u32, then width * height * channels little-endian float32 values in
/// row-major, channel-interleaved order.
struct RawTensor {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t channels = 0;
  std::vector<float> values;
};

RawTensor read_malf(const std::filesystem::path& path);
void write_malf(const std::filesystem::path& path, const RawTensor& tensor);

/// The file format is picked from the extension: .malf (lossless),
/// .png (8-bit gray or RGB), .pgm (8-bit P5, single channel only).
Image load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const Image& img);

/// 8-bit formats quantize with round-half-down, so 0.5 is stored as 127.
/// ProbMask values go through float32 in .malf files.
ProbMask load_mask(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, const ProbMask& mask);

/// 8-bit formats store set bits as 255; loading treats values >= 128 as set.
BinaryMask load_binary(const std::filesystem::path& path);
void save_binary(const std::filesystem::path& path, const BinaryMask& mask);

std::uint8_t quantize(double v);

}  // namespace mal::io
