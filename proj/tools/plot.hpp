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

#ifndef TTIC_TOOLS_PLOT_HPP_
#define TTIC_TOOLS_PLOT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "ttic/eval.hpp"
#include "ttic/image.hpp"

namespace ttic::plot {

// 5x7 bitmap glyphs for the handful of characters axis labels need.
inline const uint8_t* glyph(char c) {
  static const struct {
    char ch;
    uint8_t rows[7];
  } font[] = {
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
      {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
      {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
      {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
      {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
      {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
      {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
      {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
      {'b', {0x10, 0x10, 0x16, 0x19, 0x11, 0x11, 0x1E}},
      {'p', {0x00, 0x00, 0x1E, 0x11, 0x1E, 0x10, 0x10}},
      {'q', {0x00, 0x00, 0x0F, 0x11, 0x0F, 0x01, 0x01}},
      {' ', {0, 0, 0, 0, 0, 0, 0}},
  };
  for (const auto& g : font) {
    if (g.ch == c) return g.rows;
  }
  return font[sizeof(font) / sizeof(font[0]) - 1].rows;
}

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), data_(size_t(w) * h * 3, 255) {}

  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    if (x < 0 || x >= w_ || y < 0 || y >= h_) return;
    auto* p = &data_[(size_t(y) * w_ + x) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  void line(int x0, int y0, int x1, int y1, uint8_t r, uint8_t g, uint8_t b) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      set(x0, y0, r, g, b);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void dot(int x, int y, int rad, uint8_t r, uint8_t g, uint8_t b) {
    for (int i = -rad; i <= rad; ++i) {
      for (int j = -rad; j <= rad; ++j) {
        if (i * i + j * j <= rad * rad) set(x + j, y + i, r, g, b);
      }
    }
  }

  void text(int x, int y, const std::string& s, uint8_t r, uint8_t g, uint8_t b) {
    for (char c : s) {
      const uint8_t* rows = glyph(c);
      for (int i = 0; i < 7; ++i) {
        for (int j = 0; j < 5; ++j) {
          if (rows[i] & (1 << (4 - j))) set(x + j, y + i, r, g, b);
        }
      }
      x += 6;
    }
  }

  void save(const std::string& path) const {
    ImageU8 img;
    img.h = h_;
    img.w = w_;
    img.c = 3;
    img.data = data_;
    write_png_rgb8(path, img);
  }

 private:
  int w_, h_;
  std::vector<uint8_t> data_;
};

// Rate-quality line plot of one or more curves.
inline void save_rd_plot(const std::string& path, const std::vector<RDCurve>& curves) {
  const int W = 640, H = 480, ml = 60, mr = 20, mt = 20, mb = 45;
  Canvas cv(W, H);
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      x0 = std::min(x0, p.bpp);
      x1 = std::max(x1, p.bpp);
      y0 = std::min(y0, p.quality);
      y1 = std::max(y1, p.quality);
    }
  }
  if (!(x1 > x0)) x1 = x0 + 1;
  if (!(y1 > y0)) y1 = y0 + 1;
  const double xpad = 0.05 * (x1 - x0), ypad = 0.05 * (y1 - y0);
  x0 -= xpad;
  x1 += xpad;
  y0 -= ypad;
  y1 += ypad;
  auto px = [&](double x) { return ml + int((x - x0) / (x1 - x0) * (W - ml - mr)); };
  auto py = [&](double y) { return H - mb - int((y - y0) / (y1 - y0) * (H - mt - mb)); };

  cv.line(ml, mt, ml, H - mb, 0, 0, 0);
  cv.line(ml, H - mb, W - mr, H - mb, 0, 0, 0);
  char buf[32];
  for (int t = 0; t <= 4; ++t) {
    const double xv = x0 + (x1 - x0) * t / 4;
    const double yv = y0 + (y1 - y0) * t / 4;
    cv.line(px(xv), H - mb, px(xv), H - mb + 4, 0, 0, 0);
    std::snprintf(buf, sizeof(buf), "%.3f", xv);
    cv.text(px(xv) - 14, H - mb + 8, buf, 0, 0, 0);
    cv.line(ml - 4, py(yv), ml, py(yv), 0, 0, 0);
    std::snprintf(buf, sizeof(buf), "%.1f", yv);
    cv.text(ml - 40, py(yv) - 3, buf, 0, 0, 0);
  }
  cv.text(W / 2 - 12, H - 16, "bpp", 0, 0, 0);
  cv.text(8, mt, "q", 0, 0, 0);

  const uint8_t colors[][3] = {{200, 40, 40}, {40, 90, 200}, {30, 150, 60}, {160, 60, 180},
                               {210, 130, 30}, {0, 0, 0}};
  for (size_t ci = 0; ci < curves.size(); ++ci) {
    const auto* col = colors[ci % 6];
    const auto& pts = curves[ci].points;
    for (size_t i = 0; i < pts.size(); ++i) {
      cv.dot(px(pts[i].bpp), py(pts[i].quality), 3, col[0], col[1], col[2]);
      if (i > 0) {
        cv.line(px(pts[i - 1].bpp), py(pts[i - 1].quality), px(pts[i].bpp), py(pts[i].quality),
                col[0], col[1], col[2]);
      }
    }
  }
  cv.save(path);
}

}  // namespace ttic::plot

#endif  // TTIC_TOOLS_PLOT_HPP_
