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
#include <numeric>
#include <vector>

#include "ttic/coder.hpp"

namespace ttic {

// Largest-remainder apportionment with a floor of one count per symbol, so
// per-symbol quantization error stays within one count.
CdfTable CdfTable::from_pmf(const std::vector<double>& pmf, int precision) {
  if (precision < 2 || precision > kMaxPrecision) {
    throw CoderError("cdf table: precision out of range");
  }
  const int n = static_cast<int>(pmf.size());
  const uint32_t total = 1u << precision;
  if (n < 1) throw CoderError("cdf table: empty alphabet");
  if (static_cast<uint32_t>(n) >= total) {
    throw CoderError("cdf table: alphabet of " + std::to_string(n) +
                     " symbols too large for precision " + std::to_string(precision));
  }
  double sum = 0.0;
  for (double p : pmf) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw CoderError("cdf table: invalid pmf entry");
    sum += p;
  }
  if (sum <= 0.0) throw CoderError("cdf table: pmf sums to zero");

  std::vector<double> ideal(pmf.size());
  for (int i = 0; i < n; ++i) ideal[static_cast<size_t>(i)] = pmf[static_cast<size_t>(i)] / sum * total;
  std::vector<uint32_t> counts(pmf.size());
  int64_t assigned = 0;
  for (int i = 0; i < n; ++i) {
    counts[static_cast<size_t>(i)] =
        std::max<uint32_t>(1, static_cast<uint32_t>(std::floor(ideal[static_cast<size_t>(i)])));
    assigned += counts[static_cast<size_t>(i)];
  }
  std::vector<int> order(pmf.size());
  std::iota(order.begin(), order.end(), 0);
  if (assigned < static_cast<int64_t>(total)) {
    // Hand out remaining counts to the largest remainders.
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double ra = ideal[static_cast<size_t>(a)] - std::floor(ideal[static_cast<size_t>(a)]);
      const double rb = ideal[static_cast<size_t>(b)] - std::floor(ideal[static_cast<size_t>(b)]);
      return ra > rb;
    });
    size_t k = 0;
    while (assigned < static_cast<int64_t>(total)) {
      ++counts[static_cast<size_t>(order[k % order.size()])];
      ++k;
      ++assigned;
    }
  } else if (assigned > static_cast<int64_t>(total)) {
    // Reclaim counts from the symbols with the largest overshoot.
    while (assigned > static_cast<int64_t>(total)) {
      int best = -1;
      double best_over = -1e300;
      for (int i = 0; i < n; ++i) {
        if (counts[static_cast<size_t>(i)] <= 1) continue;
        const double over = double(counts[static_cast<size_t>(i)]) - ideal[static_cast<size_t>(i)];
        if (over > best_over) {
          best_over = over;
          best = i;
        }
      }
      if (best < 0) throw CoderError("cdf table: cannot satisfy precision");
      --counts[static_cast<size_t>(best)];
      --assigned;
    }
  }

  CdfTable t;
  t.precision_ = precision;
  t.cum_.resize(pmf.size() + 1);
  t.cum_[0] = 0;
  for (int i = 0; i < n; ++i) t.cum_[static_cast<size_t>(i) + 1] = t.cum_[static_cast<size_t>(i)] + counts[static_cast<size_t>(i)];
  return t;
}

}  // namespace ttic
