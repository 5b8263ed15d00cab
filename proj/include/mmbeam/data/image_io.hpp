#pragma once

#include <png.h>

#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmbeam::data {

// Interleaved RGB image with float channels in [0,1].
struct ImageF {
  int h = 0;
  int w = 0;
  std::vector<float> px;  // h*w*3

  float& at(int r, int c, int ch) { return px[(r * w + c) * 3 + ch]; }
  float at(int r, int c, int ch) const { return px[(r * w + c) * 3 + ch]; }
};

inline void write_png(const ImageF& img, const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (fp == nullptr) throw std::runtime_error("cannot write " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw std::runtime_error("png write failed: " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.w),
               static_cast<png_uint_32>(img.h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<size_t>(img.w) * 3);
  for (int r = 0; r < img.h; ++r) {
    for (int c = 0; c < img.w; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        float v = img.at(r, c, ch);
        v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
        row[static_cast<size_t>(c) * 3 + ch] =
            static_cast<png_byte>(v * 255.0f + 0.5f);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

inline ImageF read_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (fp == nullptr) throw std::runtime_error("cannot open " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw std::runtime_error("png read failed: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  // Normalize any input to 8-bit RGB.
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  ImageF img;
  img.h = static_cast<int>(png_get_image_height(png, info));
  img.w = static_cast<int>(png_get_image_width(png, info));
  img.px.resize(static_cast<size_t>(img.h) * img.w * 3);
  std::vector<png_byte> row(png_get_rowbytes(png, info));
  for (int r = 0; r < img.h; ++r) {
    png_read_row(png, row.data(), nullptr);
    for (int c = 0; c < img.w; ++c)
      for (int ch = 0; ch < 3; ++ch)
        img.at(r, c, ch) =
            static_cast<float>(row[static_cast<size_t>(c) * 3 + ch]) / 255.0f;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

}  // namespace mmbeam::data
