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

#ifndef TTIC_IMAGE_HPP_
#define TTIC_IMAGE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ttic/tensor.hpp"

namespace ttic {

struct ImageU8 {
  int h = 0, w = 0, c = 0;  // interleaved, c in {1, 3}
  std::vector<uint8_t> data;
};

// Codec-facing image: pixels in [0, 1], original (pre-padding) size kept for
// the final crop and for bpp denominators.
struct ImageF {
  Tensor<float> pixels;  // (h, w, 3)
  int orig_h = 0, orig_w = 0;
};

ImageU8 read_image(const std::string& path);
void write_png_rgb8(const std::string& path, const ImageU8& img);
void write_png_gray16(const std::string& path, int w, int h, const std::vector<uint16_t>& data);

ImageF to_float_image(const ImageU8& img);
ImageU8 to_u8_image(const Tensor<float>& pixels);

// Replicate-pads right/bottom so both dims are multiples of `multiple`.
ImageF pad_to_multiple(const ImageF& img, int multiple);
Tensor<float> crop_to_original(const Tensor<float>& pixels, int orig_h, int orig_w);

double psnr(const Tensor<float>& a, const Tensor<float>& b);

}  // namespace ttic

#endif  // TTIC_IMAGE_HPP_
