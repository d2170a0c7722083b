#pragma once

// Minimal libpng wrappers for 8- and 16-bit gray, RGB and RGBA images.

#include <png.h>

#include <cstdio>
#include <memory>

#include "featvid/core.hpp"

namespace featvid {

/// Interleaved pixel buffer; `bit_depth` is 8 or 16, `channels` is 1, 3 or 4.
struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 3;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;  // width * height * channels

  std::uint16_t& at(int x, int y, int c) {
    return samples[(std::size_t(y) * std::size_t(width) + std::size_t(x)) * std::size_t(channels) + std::size_t(c)];
  }
  std::uint16_t at(int x, int y, int c) const {
    return samples[(std::size_t(y) * std::size_t(width) + std::size_t(x)) * std::size_t(channels) + std::size_t(c)];
  }
  friend bool operator==(const PngImage&, const PngImage&) = default;
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

inline void png_write_to_vector(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

inline void png_flush_noop(png_structp) {}

struct ReadCursor {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;
};

inline void png_read_from_span(png_structp png, png_bytep out, png_size_t len) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + len > cur->data.size()) png_error(png, "truncated png");
  std::memcpy(out, cur->data.data() + cur->pos, len);
  cur->pos += len;
}

[[noreturn]] inline void png_throw(png_structp, png_const_charp msg) { throw Error(Errc::format, std::string("png: ") + msg); }

}  // namespace detail

inline std::vector<std::uint8_t> encode_png(const PngImage& img) {
  if (img.channels != 1 && img.channels != 3 && img.channels != 4) fail(Errc::format, "png: channels must be 1, 3 or 4");
  if (img.bit_depth != 8 && img.bit_depth != 16) fail(Errc::format, "png: bit depth must be 8 or 16");
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_throw, nullptr);
  png_infop info = png_create_info_struct(png);
  try {
    png_set_write_fn(png, &out, detail::png_write_to_vector, detail::png_flush_noop);
    png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), img.bit_depth,
                 img.channels == 4   ? PNG_COLOR_TYPE_RGBA
                 : img.channels == 3 ? PNG_COLOR_TYPE_RGB
                                     : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t bytes_per_sample = img.bit_depth / 8;
    std::vector<std::uint8_t> row(std::size_t(img.width) * std::size_t(img.channels) * bytes_per_sample);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < img.channels; ++c) {
          const std::uint16_t s = img.at(x, y, c);
          const std::size_t o = (std::size_t(x) * std::size_t(img.channels) + std::size_t(c)) * bytes_per_sample;
          if (bytes_per_sample == 1) {
            row[o] = std::uint8_t(s);
          } else {  // PNG stores 16-bit samples big-endian
            row[o] = std::uint8_t(s >> 8);
            row[o + 1] = std::uint8_t(s & 0xFF);
          }
        }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

inline PngImage decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) fail(Errc::format, "png: bad signature");
  PngImage img;
  detail::ReadCursor cur{bytes, 0};
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, detail::png_throw, nullptr);
  png_infop info = png_create_info_struct(png);
  try {
    png_set_read_fn(png, &cur, detail::png_read_from_span);
    png_read_info(png, info);
    img.width = int(png_get_image_width(png, info));
    img.height = int(png_get_image_height(png, info));
    img.bit_depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_RGB) {
      img.channels = 3;
    } else if (color == PNG_COLOR_TYPE_RGBA) {
      img.channels = 4;
    } else if (color == PNG_COLOR_TYPE_GRAY) {
      img.channels = 1;
    } else {
      fail(Errc::format, "png: only gray, rgb and rgba are supported");
    }
    if (img.bit_depth != 8 && img.bit_depth != 16) fail(Errc::format, "png: unsupported bit depth");
    const std::size_t bps = std::size_t(img.bit_depth / 8);
    std::vector<std::uint8_t> row(png_get_rowbytes(png, info));
    img.samples.resize(std::size_t(img.width) * std::size_t(img.height) * std::size_t(img.channels));
    for (int y = 0; y < img.height; ++y) {
      png_read_row(png, row.data(), nullptr);
      for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < img.channels; ++c) {
          const std::size_t o = (std::size_t(x) * std::size_t(img.channels) + std::size_t(c)) * bps;
          img.at(x, y, c) = bps == 1 ? row[o] : std::uint16_t((row[o] << 8) | row[o + 1]);
        }
    }
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace featvid
