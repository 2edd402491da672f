#include "drivedit/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include <fmt/format.h>

namespace drivedit::png {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr file(std::fopen(path.c_str(), mode));
  if (!file) throw InputError(fmt::format("{}: cannot open file", path.string()));
  return file;
}

[[noreturn]] void on_png_error(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = msg;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

struct Decoded {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int channels = 0;
  std::vector<png_byte> bytes;
};

Decoded decode(const std::filesystem::path& path, bool want16) {
  auto file = open_file(path, "rb");
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, on_png_error, on_png_warning);
  if (!png) throw InputError(fmt::format("{}: libpng init failed", path.string()));
  png_infop info = png_create_info_struct(png);
  Decoded out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError(fmt::format("{}: invalid PNG ({})", path.string(), error));
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (want16) {
    if (depth != 16 || color != PNG_COLOR_TYPE_GRAY) {
      png_destroy_read_struct(&png, &info, nullptr);
      throw InputError(fmt::format("{}: expected 16-bit grayscale PNG", path.string()));
    }
    png_set_swap(png);  // host little-endian order for uint16_t
  } else {
    if (depth == 16) {
      png_destroy_read_struct(&png, &info, nullptr);
      throw InputError(fmt::format("{}: expected 8-bit PNG", path.string()));
    }
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  }
  png_read_update_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.bit_depth = png_get_bit_depth(png, info);
  out.channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.bytes.resize(stride * out.height);
  rows.resize(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = out.bytes.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

template <typename T>
void encode(const std::filesystem::path& path, const Image<T>& image, int bit_depth) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw Error(fmt::format("{}: unsupported channel count {}", path.string(), image.channels()));
  }
  const int color = image.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  if (image.width() == 0 || image.height() == 0) throw Error(fmt::format("{}: empty image", path.string()));
  auto file = open_file(path, "wb");
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, on_png_error, on_png_warning);
  if (!png) throw Error(fmt::format("{}: libpng init failed", path.string()));
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows(image.height());
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(fmt::format("{}: PNG write failed ({})", path.string(), error));
  }
  png_init_io(png, file.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, image.width(), image.height(), bit_depth, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  const std::size_t stride = static_cast<std::size_t>(image.width()) * image.channels();
  auto* base = const_cast<T*>(image.data().data());
  for (int y = 0; y < image.height(); ++y) {
    rows[y] = reinterpret_cast<png_bytep>(base + stride * y);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

ImageU8 read_u8(const std::filesystem::path& path, int channels) {
  if (channels != 1 && channels != 3) throw Error("png::read_u8: channels must be 1 or 3");
  const Decoded d = decode(path, false);
  ImageU8 out(d.width, d.height, channels);
  const std::size_t stride = static_cast<std::size_t>(d.width) * d.channels;
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      const png_byte* px = d.bytes.data() + stride * y + static_cast<std::size_t>(x) * d.channels;
      if (channels == d.channels) {
        for (int c = 0; c < channels; ++c) out.at(x, y, c) = px[c];
      } else if (channels == 3) {  // gray -> rgb
        for (int c = 0; c < 3; ++c) out.at(x, y, c) = px[0];
      } else {  // rgb -> gray
        const double v = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
        out.at(x, y) = static_cast<std::uint8_t>(v + 0.5);
      }
    }
  }
  return out;
}

ImageU16 read_u16(const std::filesystem::path& path) {
  const Decoded d = decode(path, true);
  ImageU16 out(d.width, d.height, 1);
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      std::uint16_t v = 0;
      std::memcpy(&v, d.bytes.data() + (static_cast<std::size_t>(y) * d.width + x) * 2, 2);
      out.at(x, y) = v;
    }
  }
  return out;
}

void write(const std::filesystem::path& path, const ImageU8& image) { encode(path, image, 8); }
void write(const std::filesystem::path& path, const ImageU16& image) {
  if (image.channels() != 1) throw Error(fmt::format("{}: 16-bit output must be single-channel", path.string()));
  encode(path, image, 16);
}

}  // namespace drivedit::png
