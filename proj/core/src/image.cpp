// Copyright (c) the ttic project authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ttic/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace ttic {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

ImageU8 read_image(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("cannot open image: " + path);
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw std::runtime_error("not a PNG file: " + path);
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("failed to decode PNG: " + path);
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_read_update_info(png, info);

  ImageU8 img;
  img.h = static_cast<int>(png_get_image_height(png, info));
  img.w = static_cast<int>(png_get_image_width(png, info));
  img.c = 3;
  img.data.resize(static_cast<size_t>(img.h) * img.w * 3);
  std::vector<png_bytep> rows(static_cast<size_t>(img.h));
  for (int i = 0; i < img.h; ++i) {
    rows[static_cast<size_t>(i)] = img.data.data() + static_cast<size_t>(i) * img.w * 3;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

namespace {

void write_png(const std::string& path, int w, int h, int bit_depth, int color_type,
               const std::vector<png_bytep>& rows) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed to encode PNG: " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bit_depth,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);  // rows are host-endian uint16
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png_rgb8(const std::string& path, const ImageU8& img) {
  if (img.c != 3) throw std::runtime_error("write_png_rgb8: expected 3 channels");
  std::vector<png_bytep> rows(static_cast<size_t>(img.h));
  for (int i = 0; i < img.h; ++i) {
    rows[static_cast<size_t>(i)] =
        const_cast<png_bytep>(img.data.data() + static_cast<size_t>(i) * img.w * 3);
  }
  write_png(path, img.w, img.h, 8, PNG_COLOR_TYPE_RGB, rows);
}

void write_png_gray16(const std::string& path, int w, int h, const std::vector<uint16_t>& data) {
  if (static_cast<int64_t>(data.size()) != int64_t(w) * h) {
    throw std::runtime_error("write_png_gray16: size mismatch");
  }
  std::vector<png_bytep> rows(static_cast<size_t>(h));
  for (int i = 0; i < h; ++i) {
    rows[static_cast<size_t>(i)] =
        reinterpret_cast<png_bytep>(const_cast<uint16_t*>(data.data() + static_cast<size_t>(i) * w));
  }
  write_png(path, w, h, 16, PNG_COLOR_TYPE_GRAY, rows);
}

ImageF to_float_image(const ImageU8& img) {
  ImageF out;
  out.pixels = Tensor<float>({img.h, img.w, 3});
  for (int64_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = float(img.data[static_cast<size_t>(i)]) / 255.0f;
  }
  out.orig_h = img.h;
  out.orig_w = img.w;
  return out;
}

ImageU8 to_u8_image(const Tensor<float>& pixels) {
  ImageU8 out;
  out.h = pixels.dim(0);
  out.w = pixels.dim(1);
  out.c = 3;
  out.data.resize(static_cast<size_t>(pixels.size()));
  for (int64_t i = 0; i < pixels.size(); ++i) {
    const float v = std::min(1.0f, std::max(0.0f, pixels[i]));
    out.data[static_cast<size_t>(i)] = static_cast<uint8_t>(std::lround(v * 255.0f));
  }
  return out;
}

ImageF pad_to_multiple(const ImageF& img, int multiple) {
  if (multiple < 1) throw PreconditionError("pad_to_multiple: multiple must be >= 1");
  const int h = img.pixels.dim(0), w = img.pixels.dim(1), c = img.pixels.dim(2);
  const int ph = (h + multiple - 1) / multiple * multiple;
  const int pw = (w + multiple - 1) / multiple * multiple;
  ImageF out;
  out.orig_h = img.orig_h > 0 ? img.orig_h : h;
  out.orig_w = img.orig_w > 0 ? img.orig_w : w;
  if (ph == h && pw == w) {
    out.pixels = img.pixels;
    return out;
  }
  out.pixels = Tensor<float>({ph, pw, c});
  for (int i = 0; i < ph; ++i) {
    const int si = std::min(i, h - 1);
    for (int j = 0; j < pw; ++j) {
      const int sj = std::min(j, w - 1);
      for (int k = 0; k < c; ++k) out.pixels.at(i, j, k) = img.pixels.at(si, sj, k);
    }
  }
  return out;
}

Tensor<float> crop_to_original(const Tensor<float>& pixels, int orig_h, int orig_w) {
  const int w = pixels.dim(1), c = pixels.dim(2);
  if (orig_h > pixels.dim(0) || orig_w > w) {
    throw StructuralError("crop_to_original: original size exceeds padded size");
  }
  Tensor<float> out({orig_h, orig_w, c});
  for (int i = 0; i < orig_h; ++i) {
    std::copy_n(pixels.data() + int64_t(i) * w * c, int64_t(orig_w) * c,
                out.data() + int64_t(i) * orig_w * c);
  }
  return out;
}

double psnr(const Tensor<float>& a, const Tensor<float>& b) {
  if (!a.same_shape(b)) throw StructuralError("psnr: shape mismatch");
  double mse = 0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    mse += d * d;
  }
  mse /= double(a.size());
  if (mse <= 0) return 99.0;
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace ttic
