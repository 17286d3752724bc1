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

#include "ttic/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

namespace ttic {

namespace fs = std::filesystem;

Dataset Dataset::load(const DatasetSpec& spec) {
  const fs::path split_dir = fs::path(spec.root) / spec.split;
  Dataset out;
  if (!fs::exists(split_dir)) {
    throw std::runtime_error("dataset split does not exist: " + split_dir.string());
  }
  std::vector<std::string> class_dirs;
  for (const auto& e : fs::directory_iterator(split_dir)) {
    if (e.is_directory()) class_dirs.push_back(e.path().filename().string());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  out.class_names_ = class_dirs;
  out.num_classes_ = int(class_dirs.size());

  std::vector<std::pair<std::string, int>> files;
  if (class_dirs.empty()) {
    // flat, unlabeled layout
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(split_dir)) {
      if (e.is_regular_file()) names.push_back(e.path().string());
    }
    std::sort(names.begin(), names.end());
    for (auto& n : names) files.emplace_back(n, -1);
  } else {
    for (size_t ci = 0; ci < class_dirs.size(); ++ci) {
      std::vector<std::string> names;
      for (const auto& e : fs::directory_iterator(split_dir / class_dirs[ci])) {
        if (e.is_regular_file()) names.push_back(e.path().string());
      }
      std::sort(names.begin(), names.end());
      for (auto& n : names) files.emplace_back(n, int(ci));
    }
  }

  for (const auto& [path, label] : files) {
    try {
      auto img = read_image(path);
      Sample s;
      s.image = to_float_image(img).pixels;
      s.label = spec.labeled ? label : -1;
      out.samples_.push_back(std::move(s));
    } catch (const std::exception& e) {
      std::fprintf(stderr, "warning: skipping unreadable image %s (%s)\n", path.c_str(),
                   e.what());
      ++out.skipped_;
    }
  }

  // Deterministic Fisher-Yates under the spec seed.
  Rng rng(derive_seed(spec.seed, "dataset-shuffle"));
  for (size_t i = out.samples_.size(); i > 1; --i) {
    const size_t j = size_t(rng.below(i));
    std::swap(out.samples_[i - 1], out.samples_[j]);
  }
  return out;
}

Tensor<float> random_crop(const Tensor<float>& image, int size, Rng& rng) {
  int h = image.dim(0), w = image.dim(1);
  const int c = image.dim(2);
  Tensor<float> src = image;
  if (h < size || w < size) {
    const int nh = std::max(h, size), nw = std::max(w, size);
    Tensor<float> padded({nh, nw, c});
    for (int i = 0; i < nh; ++i) {
      for (int j = 0; j < nw; ++j) {
        for (int k = 0; k < c; ++k) {
          padded.at(i, j, k) = image.at(std::min(i, h - 1), std::min(j, w - 1), k);
        }
      }
    }
    src = std::move(padded);
    h = nh;
    w = nw;
  }
  const int oy = h == size ? 0 : int(rng.below(uint64_t(h - size + 1)));
  const int ox = w == size ? 0 : int(rng.below(uint64_t(w - size + 1)));
  Tensor<float> out({size, size, c});
  for (int i = 0; i < size; ++i) {
    std::copy_n(src.data() + (int64_t(oy + i) * w + ox) * c, int64_t(size) * c,
                out.data() + int64_t(i) * size * c);
  }
  return out;
}

const std::vector<std::string>& synthetic_class_names() {
  static const std::vector<std::string> names = {"checker", "circle", "cross",    "diamond",
                                                 "dots",    "hstripes", "ring",   "square",
                                                 "triangle", "vstripes"};
  return names;
}

namespace {

struct Palette {
  float bg[3], fg[3];
};

Palette random_palette(Rng& rng) {
  Palette p;
  for (int k = 0; k < 3; ++k) p.bg[k] = float(rng.uniform(0.05, 0.95));
  // foreground pushed away from background per channel
  for (int k = 0; k < 3; ++k) {
    const float delta = float(rng.uniform(0.45, 0.7));
    p.fg[k] = p.bg[k] > 0.5f ? p.bg[k] - delta : p.bg[k] + delta;
    p.fg[k] = std::min(0.98f, std::max(0.02f, p.fg[k]));
  }
  return p;
}

// Returns true when (x, y) lies inside the class shape. Coordinates are
// normalized to [-1, 1] around the (jittered) shape centre.
bool inside_shape(int cls, double x, double y, double freq) {
  const double r = std::sqrt(x * x + y * y);
  switch (cls) {
    case 0:  // checker
      return (int(std::floor(x * freq)) + int(std::floor(y * freq))) % 2 == 0 &&
             std::max(std::abs(x), std::abs(y)) < 1.0;
    case 1:  // circle
      return r < 0.85;
    case 2:  // cross
      return (std::abs(x) < 0.28 || std::abs(y) < 0.28) && std::max(std::abs(x), std::abs(y)) < 0.9;
    case 3:  // diamond
      return std::abs(x) + std::abs(y) < 1.0;
    case 4: {  // dots
      const double fx = x * freq - std::floor(x * freq) - 0.5;
      const double fy = y * freq - std::floor(y * freq) - 0.5;
      return fx * fx + fy * fy < 0.13 && std::max(std::abs(x), std::abs(y)) < 1.0;
    }
    case 5:  // hstripes
      return std::fmod(std::floor(y * freq) + 64.0, 2.0) == 0.0 &&
             std::max(std::abs(x), std::abs(y)) < 1.0;
    case 6:  // ring
      return r < 0.9 && r > 0.5;
    case 7:  // square
      return std::max(std::abs(x), std::abs(y)) < 0.8;
    case 8:  // triangle
      return y > -0.8 && y < 0.8 && std::abs(x) < (0.8 - y) * 0.6;
    case 9:  // vstripes
      return std::fmod(std::floor(x * freq) + 64.0, 2.0) == 0.0 &&
             std::max(std::abs(x), std::abs(y)) < 1.0;
  }
  return false;
}

ImageU8 render_sample(int cls, int size, Rng& rng) {
  const Palette pal = random_palette(rng);
  const double cx = rng.uniform(0.35, 0.65) * size;
  const double cy = rng.uniform(0.35, 0.65) * size;
  const double scale = rng.uniform(0.3, 0.44) * size;
  const double freq = rng.uniform(2.0, 3.2);
  const double noise_amp = rng.uniform(0.01, 0.04);
  // cheap value-noise texture so flat regions still carry bits
  const double tex_fx = rng.uniform(0.15, 0.45), tex_fy = rng.uniform(0.15, 0.45);
  const double tex_phase = rng.uniform(0.0, 6.28);

  ImageU8 img;
  img.h = size;
  img.w = size;
  img.c = 3;
  img.data.resize(size_t(size) * size * 3);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double x = (j - cx) / scale;
      const double y = (i - cy) / scale;
      const bool fg = inside_shape(cls, x, y, freq);
      const double tex = 0.05 * std::sin(tex_fx * j + tex_phase) * std::cos(tex_fy * i);
      for (int k = 0; k < 3; ++k) {
        double v = (fg ? pal.fg[k] : pal.bg[k]) + tex + rng.uniform(-noise_amp, noise_amp);
        v = std::min(1.0, std::max(0.0, v));
        img.data[(size_t(i) * size + j) * 3 + size_t(k)] = uint8_t(std::lround(v * 255.0));
      }
    }
  }
  return img;
}

}  // namespace

void generate_synthetic_corpus(const std::string& root, int per_class_train, int per_class_val,
                               int image_size, uint64_t seed) {
  const auto& names = synthetic_class_names();
  for (const std::string split : {"train", "val"}) {
    const int per_class = split == std::string("train") ? per_class_train : per_class_val;
    for (size_t cls = 0; cls < names.size(); ++cls) {
      const fs::path dir = fs::path(root) / split / names[cls];
      fs::create_directories(dir);
      for (int i = 0; i < per_class; ++i) {
        Rng rng(derive_seed(seed, split, cls, uint64_t(i)));
        auto img = render_sample(int(cls), image_size, rng);
        char name[32];
        std::snprintf(name, sizeof(name), "%05d.png", i);
        write_png_rgb8((dir / name).string(), img);
      }
    }
  }
}

}  // namespace ttic
