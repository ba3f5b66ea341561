#include "mal/io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "mal/errors.hpp"

namespace mal::io {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 4> kMagic = {'M', 'A', 'L', 'F'};
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 31;

enum class Format { kMalf, kPng, kPgm };

Format format_of(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".malf") return Format::kMalf;
  if (ext == ".png") return Format::kPng;
  if (ext == ".pgm") return Format::kPgm;
  throw InvalidArgument("unsupported file extension '" + ext + "' for " + path.string());
}

std::vector<char> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string s = ss.str();
  return {s.begin(), s.end()};
}

void write_all(const fs::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}

void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

// 8-bit raster shared by the PNG and PGM paths.
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};

Raster read_png(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&image, path.string().c_str()) == 0) {
    const std::string msg = image.message;
    if (!fs::exists(path)) throw IoError("cannot open " + path.string());
    throw FormatError("malformed PNG " + path.string() + ": " + msg);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Raster r{static_cast<int>(image.width), static_cast<int>(image.height), color ? 3 : 1, {}};
  r.pixels.resize(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, r.pixels.data(), 0, nullptr) == 0) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw FormatError("malformed PNG " + path.string() + ": " + msg);
  }
  return r;
}

void write_png(const fs::path& path, const Raster& r) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(r.width);
  image.height = static_cast<png_uint_32>(r.height);
  image.format = r.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (png_image_write_to_file(&image, path.string().c_str(), 0, r.pixels.data(), 0, nullptr) == 0) {
    throw IoError("PNG write failed for " + path.string() + ": " + image.message);
  }
}

Raster read_pgm(const fs::path& path) {
  const auto bytes = read_all(path);
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_space();
    long v = 0;
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > std::numeric_limits<int>::max()) throw FormatError("PGM dimension overflow in " + path.string());
      ++pos;
    }
    if (pos == start) throw FormatError("malformed PGM header in " + path.string());
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw FormatError("malformed PGM header in " + path.string());
  }
  pos = 2;
  const long w = read_int();
  const long h = read_int();
  const long maxval = read_int();
  if (w < 1 || h < 1 || maxval != 255) throw FormatError("unsupported PGM header in " + path.string());
  if (static_cast<std::uint64_t>(w) * static_cast<std::uint64_t>(h) > kMaxElements) {
    throw FormatError("PGM dimension overflow in " + path.string());
  }
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError("malformed PGM header in " + path.string());
  }
  ++pos;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() - pos < n) throw FormatError("truncated PGM data in " + path.string());
  Raster r{static_cast<int>(w), static_cast<int>(h), 1, {}};
  r.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                  bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return r;
}

void write_pgm(const fs::path& path, const Raster& r) {
  if (r.channels != 1) throw InvalidArgument("PGM holds single-channel data only: " + path.string());
  const std::string header = "P5\n" + std::to_string(r.width) + " " + std::to_string(r.height) + "\n255\n";
  std::vector<char> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), r.pixels.begin(), r.pixels.end());
  write_all(path, bytes);
}

Raster read_raster(const fs::path& path, Format f) {
  return f == Format::kPng ? read_png(path) : read_pgm(path);
}

void write_raster(const fs::path& path, Format f, const Raster& r) {
  if (f == Format::kPng) {
    write_png(path, r);
  } else {
    write_pgm(path, r);
  }
}

// Converts an 8-bit raster to one channel; RGB is only accepted when all
// three channels agree, which is what our own writers produce.
std::vector<std::uint8_t> single_channel(const Raster& r, const fs::path& path) {
  if (r.channels == 1) return r.pixels;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(r.width) * r.height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto* p = &r.pixels[i * 3];
    if (p[0] != p[1] || p[1] != p[2]) throw FormatError("expected a grayscale mask in " + path.string());
    out[i] = p[0];
  }
  return out;
}

}  // namespace

std::uint8_t quantize(double v) {
  const double scaled = std::ceil(std::clamp(v, 0.0, 1.0) * 255.0 - 0.5);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

RawTensor read_malf(const fs::path& path) {
  const auto bytes = read_all(path);
  if (bytes.size() < 16 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw FormatError("malformed MALF header in " + path.string());
  }
  RawTensor t;
  t.width = get_u32(bytes.data() + 4);
  t.height = get_u32(bytes.data() + 8);
  t.channels = get_u32(bytes.data() + 12);
  const std::uint64_t n = std::uint64_t{t.width} * t.height * t.channels;
  if (n == 0) throw FormatError("MALF file with zero-sized dimension: " + path.string());
  if (n >= kMaxElements) throw FormatError("MALF dimension overflow in " + path.string());
  if (bytes.size() - 16 != n * 4) throw FormatError("MALF payload size mismatch in " + path.string());
  t.values.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    t.values[i] = std::bit_cast<float>(get_u32(bytes.data() + 16 + 4 * i));
  }
  return t;
}

void write_malf(const fs::path& path, const RawTensor& t) {
  if (t.values.size() != std::size_t{t.width} * t.height * t.channels) {
    throw DimensionMismatch("MALF tensor size does not match its dimensions");
  }
  std::vector<char> out(kMagic.begin(), kMagic.end());
  out.reserve(16 + 4 * t.values.size());
  put_u32(out, t.width);
  put_u32(out, t.height);
  put_u32(out, t.channels);
  for (float v : t.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  write_all(path, out);
}

Image load_image(const fs::path& path) {
  const Format f = format_of(path);
  if (f == Format::kMalf) {
    auto t = read_malf(path);
    return Image(static_cast<int>(t.width), static_cast<int>(t.height), static_cast<int>(t.channels),
                 std::move(t.values));
  }
  const Raster r = read_raster(path, f);
  std::vector<float> v(r.pixels.size());
  std::transform(r.pixels.begin(), r.pixels.end(), v.begin(),
                 [](std::uint8_t b) { return static_cast<float>(b) / 255.0F; });
  return Image(r.width, r.height, r.channels, std::move(v));
}

void save_image(const fs::path& path, const Image& img) {
  const Format f = format_of(path);
  if (f == Format::kMalf) {
    write_malf(path, {static_cast<std::uint32_t>(img.width()), static_cast<std::uint32_t>(img.height()),
                      static_cast<std::uint32_t>(img.channels()),
                      std::vector<float>(img.data().begin(), img.data().end())});
    return;
  }
  Raster r{img.width(), img.height(), img.channels(), std::vector<std::uint8_t>(img.data().size())};
  std::transform(img.data().begin(), img.data().end(), r.pixels.begin(), [](float v) { return quantize(v); });
  write_raster(path, f, r);
}

ProbMask load_mask(const fs::path& path) {
  const Format f = format_of(path);
  if (f == Format::kMalf) {
    const auto t = read_malf(path);
    if (t.channels != 1) throw FormatError("mask files hold one channel: " + path.string());
    return ProbMask(static_cast<int>(t.width), static_cast<int>(t.height),
                    std::vector<double>(t.values.begin(), t.values.end()));
  }
  const Raster r = read_raster(path, f);
  const auto px = single_channel(r, path);
  std::vector<double> v(px.size());
  std::transform(px.begin(), px.end(), v.begin(), [](std::uint8_t b) { return b / 255.0; });
  return ProbMask(r.width, r.height, std::move(v));
}

void save_mask(const fs::path& path, const ProbMask& mask) {
  const Format f = format_of(path);
  if (f == Format::kMalf) {
    write_malf(path, {static_cast<std::uint32_t>(mask.width()), static_cast<std::uint32_t>(mask.height()), 1,
                      std::vector<float>(mask.data().begin(), mask.data().end())});
    return;
  }
  Raster r{mask.width(), mask.height(), 1, std::vector<std::uint8_t>(mask.size())};
  std::transform(mask.data().begin(), mask.data().end(), r.pixels.begin(), [](double v) { return quantize(v); });
  write_raster(path, f, r);
}

BinaryMask load_binary(const fs::path& path) {
  const Format f = format_of(path);
  if (f == Format::kMalf) {
    const auto t = read_malf(path);
    if (t.channels != 1) throw FormatError("mask files hold one channel: " + path.string());
    std::vector<std::uint8_t> bits(t.values.size());
    std::transform(t.values.begin(), t.values.end(), bits.begin(), [](float v) { return v >= 0.5F ? 1 : 0; });
    return BinaryMask(static_cast<int>(t.width), static_cast<int>(t.height), std::move(bits));
  }
  const Raster r = read_raster(path, f);
  auto px = single_channel(r, path);
  for (auto& b : px) b = b >= 128 ? 1 : 0;
  return BinaryMask(r.width, r.height, std::move(px));
}

void save_binary(const fs::path& path, const BinaryMask& mask) {
  const Format f = format_of(path);
  if (f == Format::kMalf) {
    write_malf(path, {static_cast<std::uint32_t>(mask.width()), static_cast<std::uint32_t>(mask.height()), 1,
                      std::vector<float>(mask.bits().begin(), mask.bits().end())});
    return;
  }
  Raster r{mask.width(), mask.height(), 1, std::vector<std::uint8_t>(mask.size())};
  std::transform(mask.bits().begin(), mask.bits().end(), r.pixels.begin(),
                 [](std::uint8_t b) { return b != 0 ? 255 : 0; });
  write_raster(path, f, r);
}

}  // namespace mal::io
