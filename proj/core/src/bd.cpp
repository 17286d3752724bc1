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

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ttic/eval.hpp"

namespace ttic {

void RDCurve::validate() const {
  if (points.size() < 4) {
    throw StructuralError("rd curve: at least 4 points required, got " +
                          std::to_string(points.size()));
  }
  for (size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i].quality) || !std::isfinite(points[i].bpp)) {
      throw StructuralError("rd curve: non-finite point");
    }
    if (points[i].bpp < 0) throw StructuralError("rd curve: negative bpp");
    if (i > 0 && points[i].bpp <= points[i - 1].bpp) {
      throw StructuralError("rd curve: bpp must be strictly increasing");
    }
  }
}

void RDCurve::sort_by_bpp() {
  std::sort(points.begin(), points.end(),
            [](const RDPoint& a, const RDPoint& b) { return a.bpp < b.bpp; });
}

std::vector<double> pchip_slopes(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  if (n < 2 || y.size() != n) throw std::invalid_argument("pchip: need >= 2 points");
  for (size_t i = 1; i < n; ++i) {
    if (!(x[i] > x[i - 1])) throw std::invalid_argument("pchip: x must be strictly increasing");
  }
  std::vector<double> h(n - 1), delta(n - 1), d(n);
  for (size_t i = 0; i + 1 < n; ++i) {
    h[i] = x[i + 1] - x[i];
    delta[i] = (y[i + 1] - y[i]) / h[i];
  }
  if (n == 2) {
    d[0] = d[1] = delta[0];
    return d;
  }
  for (size_t i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] <= 0) {
      d[i] = 0;
    } else {
      const double w1 = 2 * h[i] + h[i - 1];
      const double w2 = h[i] + 2 * h[i - 1];
      d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
  }
  auto endpoint = [](double h0, double h1, double d0, double d1) {
    double d = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (d * d0 <= 0) {
      d = 0;
    } else if (d0 * d1 <= 0 && std::abs(d) > 3 * std::abs(d0)) {
      d = 3 * d0;
    }
    return d;
  };
  d[0] = endpoint(h[0], h[1], delta[0], delta[1]);
  d[n - 1] = endpoint(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  return d;
}

namespace {

// Integral of one Hermite segment expressed in local t over [t0, t1].
double hermite_segment_integral(double y0, double y1, double d0, double d1, double h, double t0,
                                double t1) {
  const double a = y0;
  const double b = h * d0;
  const double c = -3 * y0 - 2 * h * d0 + 3 * y1 - h * d1;
  const double e = 2 * y0 + h * d0 - 2 * y1 + h * d1;
  auto F = [&](double t) {
    return a * t + b * t * t / 2 + c * t * t * t / 3 + e * t * t * t * t / 4;
  };
  return h * (F(t1) - F(t0));
}

}  // namespace

double pchip_integrate(const std::vector<double>& x, const std::vector<double>& y,
                       const std::vector<double>& d, double a, double b) {
  if (a < x.front() - 1e-12 || b > x.back() + 1e-12 || a > b) {
    throw std::invalid_argument("pchip_integrate: range outside knots");
  }
  double total = 0;
  for (size_t i = 0; i + 1 < x.size(); ++i) {
    const double lo = std::max(a, x[i]);
    const double hi = std::min(b, x[i + 1]);
    if (hi <= lo) continue;
    const double h = x[i + 1] - x[i];
    const double t0 = (lo - x[i]) / h;
    const double t1 = (hi - x[i]) / h;
    total += hermite_segment_integral(y[i], y[i + 1], d[i], d[i + 1], h, t0, t1);
  }
  return total;
}

namespace {

struct Prepared {
  std::vector<double> x, y, d;
};

// axes: x strictly increasing after sorting; throws on ties.
Prepared prepare(const std::vector<double>& xs, const std::vector<double>& ys,
                 const char* what) {
  std::vector<size_t> order(xs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return xs[a] < xs[b]; });
  Prepared p;
  for (size_t i : order) {
    if (!p.x.empty() && xs[i] <= p.x.back()) {
      throw std::invalid_argument(std::string("bd: ") + what +
                                  " values must be distinct and monotone");
    }
    p.x.push_back(xs[i]);
    p.y.push_back(ys[i]);
  }
  p.d = pchip_slopes(p.x, p.y);
  return p;
}

double bd_delta(const Prepared& anchor, const Prepared& test, const char* axis) {
  const double lo = std::max(anchor.x.front(), test.x.front());
  const double hi = std::min(anchor.x.back(), test.x.back());
  if (!(hi > lo)) {
    throw std::invalid_argument(std::string("bd: curves have no overlapping ") + axis +
                                " range");
  }
  const double ia = pchip_integrate(anchor.x, anchor.y, anchor.d, lo, hi);
  const double it = pchip_integrate(test.x, test.y, test.d, lo, hi);
  return (it - ia) / (hi - lo);
}

}  // namespace

double bd_rate_percent(const RDCurve& anchor, const RDCurve& test) {
  if (anchor.points.size() < 2 || test.points.size() < 2) {
    throw std::invalid_argument("bd_rate: need at least two points per curve");
  }
  auto log_rates = [](const RDCurve& c) {
    std::vector<double> q, lr;
    for (const auto& p : c.points) {
      if (!(p.bpp > 0)) throw std::invalid_argument("bd_rate: bpp must be positive");
      q.push_back(p.quality);
      lr.push_back(std::log2(p.bpp));
    }
    return std::pair{q, lr};
  };
  auto [qa, ra] = log_rates(anchor);
  auto [qt, rt] = log_rates(test);
  const auto pa = prepare(qa, ra, "quality");
  const auto pt = prepare(qt, rt, "quality");
  const double delta = bd_delta(pa, pt, "quality");
  return (std::exp2(delta) - 1.0) * 100.0;
}

double bd_quality(const RDCurve& anchor, const RDCurve& test) {
  if (anchor.points.size() < 2 || test.points.size() < 2) {
    throw std::invalid_argument("bd_quality: need at least two points per curve");
  }
  auto axes = [](const RDCurve& c) {
    std::vector<double> lr, q;
    for (const auto& p : c.points) {
      if (!(p.bpp > 0)) throw std::invalid_argument("bd_quality: bpp must be positive");
      lr.push_back(std::log2(p.bpp));
      q.push_back(p.quality);
    }
    return std::pair{lr, q};
  };
  auto [ra, qa] = axes(anchor);
  auto [rt, qt] = axes(test);
  const auto pa = prepare(ra, qa, "rate");
  const auto pt = prepare(rt, qt, "rate");
  return bd_delta(pa, pt, "rate");
}

}  // namespace ttic
