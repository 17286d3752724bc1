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

#ifndef TTIC_EVAL_HPP_
#define TTIC_EVAL_HPP_

#include <string>
#include <vector>

#include "ttic/data.hpp"
#include "ttic/tasknet.hpp"
#include "ttic/train.hpp"

namespace ttic {

struct RDPoint {
  double bpp = 0;      // against original (pre-padding) pixels
  double quality = 0;  // PSNR dB or top-1 accuracy %
  std::string label;
};

struct RDCurve {
  std::vector<RDPoint> points;

  // Full rate-quality curves carry at least four points with strictly
  // increasing bpp and finite quality.
  void validate() const;
  void sort_by_bpp();
};

// Bjontegaard deltas via monotone piecewise-cubic interpolation on
// (quality, log2 bpp), integrated in closed form over the overlapping range.
// Negative bd_rate = rate saving; positive bd_quality = quality gain.
double bd_rate_percent(const RDCurve& anchor, const RDCurve& test);
double bd_quality(const RDCurve& anchor, const RDCurve& test);

// Monotone cubic (Fritsch-Carlson) machinery, exposed for the quadrature
// oracle in tests.
std::vector<double> pchip_slopes(const std::vector<double>& x, const std::vector<double>& y);
double pchip_integrate(const std::vector<double>& x, const std::vector<double>& y,
                       const std::vector<double>& d, double a, double b);

struct EvalPointDetail {
  double lambda = 0;
  int lambda_index = 0;
  double mean_bpp = 0;
  double mean_bpp_estimate = 0;
  double quality = 0;
  int images = 0;
};

struct EvalReport {
  std::string metric;  // "top1" | "psnr"
  RDCurve curve;
  std::vector<EvalPointDetail> details;
};

// One RD point per checkpoint: mean bpp from actual serialized streams and
// the chosen quality metric on decoded images. transfer_ckpts is empty (base
// evaluation) or matches base_ckpts element-wise. tasknet null selects PSNR.
EvalReport evaluate_rate_accuracy(const std::vector<std::string>& base_ckpts,
                                  const std::vector<std::string>& transfer_ckpts,
                                  const Dataset& data, const ToyTaskNet* tasknet,
                                  int max_images = 0);

// ---------------------------------------------------------------------------
// Complexity accounting
// ---------------------------------------------------------------------------

struct ComplexityEntry {
  std::string name;
  int64_t macs = 0;
};

struct ComplexityReport {
  std::vector<ComplexityEntry> encoder;  // g_a, h_a, prompt generation
  std::vector<ComplexityEntry> decoder;  // g_s, h_s
  std::vector<std::string> unaccounted;
  int64_t pixels = 0;

  int64_t encoder_macs() const;
  int64_t decoder_macs() const;
  double encoder_kmacs_per_pixel() const;
  double decoder_kmacs_per_pixel() const;
};

// Analytic MAC walk at the given padded input size. When transfer is given,
// prompt projections, the widened attention, and the generator are included.
ComplexityReport count_macs(const BaseCodec<float>& codec, const TransferModel<float>* transfer,
                            int h, int w);

struct ParamReport {
  int64_t base = 0;
  int64_t generator = 0;
  int64_t task_prompts = 0;
  int64_t transfer_total = 0;
};
ParamReport count_params(const BaseCodec<float>& codec, const TransferModel<float>* transfer);

}  // namespace ttic

#endif  // TTIC_EVAL_HPP_
