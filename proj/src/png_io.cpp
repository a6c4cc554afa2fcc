#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

#include "splatdiff/errors.hpp"
#include "splatdiff/splat_io.hpp"

namespace splatdiff {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct RawPng {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int color_type = 0;
  std::vector<std::uint16_t> samples;  // one per pixel, palette index or gray
};

void write_png(const std::filesystem::path& path, int width, int height,
               int bit_depth, int color_type,
               const std::vector<std::uint16_t>& samples,
               const std::vector<png_color>& palette = {}) {
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw IoError("cannot write " + path.string());
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed");
  }
  std::vector<png_byte> row(static_cast<std::size_t>(width) * (bit_depth == 16 ? 2 : 1));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  if (!palette.empty()) {
    png_set_PLTE(png, info, palette.data(), static_cast<int>(palette.size()));
  }
  // No timestamps or other metadata: output bytes depend only on pixels.
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::uint16_t v = samples[static_cast<std::size_t>(y) * width + x];
      if (bit_depth == 16) {
        row[2 * x] = static_cast<png_byte>(v >> 8);
        row[2 * x + 1] = static_cast<png_byte>(v & 0xff);
      } else {
        row[x] = static_cast<png_byte>(v);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

RawPng read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialisation failed");
  }
  RawPng out;
  std::vector<png_byte> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("libpng failed reading " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.bit_depth = png_get_bit_depth(png, info);
  out.color_type = png_get_color_type(png, info);
  if (out.color_type != PNG_COLOR_TYPE_GRAY &&
      out.color_type != PNG_COLOR_TYPE_PALETTE) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path.string() + " is not a grayscale or indexed PNG");
  }
  if (out.bit_depth < 8) png_set_packing(png);
  png_read_update_info(png, info);
  row.resize(png_get_rowbytes(png, info));
  out.samples.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int y = 0; y < out.height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < out.width; ++x) {
      std::uint16_t v = out.bit_depth == 16
                            ? static_cast<std::uint16_t>((row[2 * x] << 8) | row[2 * x + 1])
                            : row[x];
      out.samples[static_cast<std::size_t>(y) * out.width + x] = v;
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  if (out.bit_depth < 8) out.bit_depth = 8;
  return out;
}

}  // namespace

void write_change_map(const ScalarImage& map, const std::filesystem::path& path,
                      int bits) {
  if (bits != 8 && bits != 16) throw ValidationError("map bit depth must be 8 or 16");
  const double top = bits == 16 ? 65535.0 : 255.0;
  std::vector<std::uint16_t> samples(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double v = map.pixels[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValidationError("change map value outside [0,1]");
    }
    samples[i] = static_cast<std::uint16_t>(std::lround(v * top));
  }
  write_png(path, map.width, map.height, bits, PNG_COLOR_TYPE_GRAY, samples);
}

ScalarImage read_change_map(const std::filesystem::path& path) {
  const RawPng raw = read_png(path);
  if (raw.color_type != PNG_COLOR_TYPE_GRAY) {
    throw FormatError(path.string() + " is not a grayscale map");
  }
  const double top = raw.bit_depth == 16 ? 65535.0 : 255.0;
  ScalarImage map(raw.width, raw.height);
  for (std::size_t i = 0; i < map.size(); ++i) map.pixels[i] = raw.samples[i] / top;
  return map;
}

void write_mask(const MaskImage& mask, const std::filesystem::path& path) {
  std::vector<std::uint16_t> samples(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) samples[i] = mask.pixels[i] ? 255 : 0;
  write_png(path, mask.width, mask.height, 8, PNG_COLOR_TYPE_GRAY, samples);
}

MaskImage read_mask(const std::filesystem::path& path) {
  const RawPng raw = read_png(path);
  MaskImage mask(raw.width, raw.height);
  const std::uint16_t half = raw.bit_depth == 16 ? 32768 : 128;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask.pixels[i] = raw.color_type == PNG_COLOR_TYPE_PALETTE
                         ? (raw.samples[i] != 0)
                         : (raw.samples[i] >= half);
  }
  return mask;
}

void write_label_map(const LabelImage& labels, const std::filesystem::path& path) {
  static const std::vector<png_color> kPalette = {
      {0, 0, 0}, {230, 60, 40}, {40, 120, 230}};
  std::vector<std::uint16_t> samples(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    samples[i] = static_cast<std::uint16_t>(labels.pixels[i]);
  }
  write_png(path, labels.width, labels.height, 8, PNG_COLOR_TYPE_PALETTE, samples,
            kPalette);
}

LabelImage read_label_map(const std::filesystem::path& path) {
  const RawPng raw = read_png(path);
  if (raw.color_type != PNG_COLOR_TYPE_PALETTE) {
    throw FormatError(path.string() + " is not an indexed label map");
  }
  LabelImage labels(raw.width, raw.height);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (raw.samples[i] > 2) throw FormatError("label index out of range in " + path.string());
    labels.pixels[i] = static_cast<ChangeLabel>(raw.samples[i]);
  }
  return labels;
}

}  // namespace splatdiff
