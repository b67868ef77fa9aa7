#include "segadv/harness/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <vector>

#include "segadv/error.hpp"

namespace segadv::harness {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError("cannot open " + path.string());
  return f;
}

// Raw pixel rows plus geometry; the buffers live outside the setjmp frame.
struct RawPng {
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int bit_depth = 0;
  int color_type = 0;
  std::vector<png_byte> pixels;
};

enum class ReadStatus { kOk, kLibpngError, kUnsupported };

ReadStatus read_raw(std::FILE* file, RawPng& raw, int expected_color_type) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return ReadStatus::kLibpngError;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return ReadStatus::kLibpngError;
  }
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return ReadStatus::kLibpngError;
  }
  png_init_io(png, file);
  png_read_info(png, info);
  raw.width = png_get_image_width(png, info);
  raw.height = png_get_image_height(png, info);
  raw.bit_depth = png_get_bit_depth(png, info);
  raw.color_type = png_get_color_type(png, info);
  if (raw.bit_depth != 8 || raw.color_type != expected_color_type ||
      png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
    png_destroy_read_struct(&png, &info, nullptr);
    return ReadStatus::kUnsupported;
  }
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  raw.pixels.resize(row_bytes * raw.height);
  rows.resize(raw.height);
  for (png_uint_32 y = 0; y < raw.height; ++y) rows[y] = raw.pixels.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return ReadStatus::kOk;
}

RawPng read_checked(const std::filesystem::path& path, int color_type, const char* expected) {
  FilePtr file = open_file(path, "rb");
  png_byte signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw DataError(path.string() + ": not a PNG file");
  }
  std::rewind(file.get());
  RawPng raw;
  switch (read_raw(file.get(), raw, color_type)) {
    case ReadStatus::kOk:
      return raw;
    case ReadStatus::kUnsupported:
      throw DataError(path.string() + ": unsupported PNG format (bit depth " + std::to_string(raw.bit_depth) +
                      ", colour type " + std::to_string(raw.color_type) + "); expected " + expected);
    case ReadStatus::kLibpngError:
      break;
  }
  throw DataError(path.string() + ": corrupt PNG");
}

bool write_raw(std::FILE* file, std::size_t width, std::size_t height, int color_type, std::size_t channels,
               const std::uint8_t* pixels) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  std::vector<png_bytep> rows(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(pixels + y * width * channels);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

void write_checked(const std::filesystem::path& path, std::size_t width, std::size_t height, std::size_t channels,
                   const std::uint8_t* pixels) {
  if (width == 0 || height == 0) throw UsageError("cannot write an empty PNG");
  const int color_type = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  FilePtr file = open_file(path, "wb");
  if (!write_raw(file.get(), width, height, color_type, channels, pixels)) {
    throw DataError("failed writing " + path.string());
  }
  if (std::fflush(file.get()) != 0) throw DataError("failed writing " + path.string());
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw UsageError("PNG output supports 1 or 3 channels");
  write_checked(path, image.width, image.height, image.channels, image.data.data());
}

void write_mask_png(const std::filesystem::path& path, const LabelMask& mask) {
  std::vector<std::uint8_t> bytes(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask.classes[i] < 0 || mask.classes[i] > 255) throw UsageError("class id does not fit in 8 bits");
    bytes[i] = static_cast<std::uint8_t>(mask.classes[i]);
  }
  write_checked(path, mask.width, mask.height, 1, bytes.data());
}

Image read_png_rgb(const std::filesystem::path& path) {
  RawPng raw = read_checked(path, PNG_COLOR_TYPE_RGB, "8-bit RGB");
  Image img(raw.height, raw.width, 3);
  img.data.assign(raw.pixels.begin(), raw.pixels.end());
  return img;
}

LabelMask read_mask_png(const std::filesystem::path& path) {
  RawPng raw = read_checked(path, PNG_COLOR_TYPE_GRAY, "8-bit greyscale");
  LabelMask mask(raw.height, raw.width);
  for (std::size_t i = 0; i < mask.size(); ++i) mask.classes[i] = raw.pixels[i];
  return mask;
}

}  // namespace segadv::harness
