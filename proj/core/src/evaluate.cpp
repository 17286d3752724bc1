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

#include <cmath>

#include "ttic/bitstream.hpp"
#include "ttic/checkpoint.hpp"
#include "ttic/eval.hpp"

namespace ttic {

EvalReport evaluate_rate_accuracy(const std::vector<std::string>& base_ckpts,
                                  const std::vector<std::string>& transfer_ckpts,
                                  const Dataset& data, const ToyTaskNet* tasknet,
                                  int max_images) {
  if (base_ckpts.empty()) throw std::runtime_error("evaluate: no checkpoints given");
  if (!transfer_ckpts.empty() && transfer_ckpts.size() != base_ckpts.size()) {
    throw std::runtime_error("evaluate: transfer checkpoints must match base checkpoints");
  }
  const size_t n_images =
      max_images > 0 ? std::min<size_t>(size_t(max_images), data.size()) : data.size();
  if (n_images == 0) throw std::runtime_error("evaluate: empty dataset");

  EvalReport rep;
  rep.metric = tasknet ? "top1" : "psnr";
  for (size_t ci = 0; ci < base_ckpts.size(); ++ci) {
    auto base = load_base_bundle(base_ckpts[ci]);
    std::unique_ptr<TransferBundle> transfer;
    if (!transfer_ckpts.empty()) {
      transfer = std::make_unique<TransferBundle>(
          load_transfer_bundle(transfer_ckpts[ci], base.digest));
    }
    const std::string digest_before = params_digest(base.codec->params());

    CodecCoder coder(*base.codec);
    const TransferModel<float>* tm = transfer ? transfer->model.get() : nullptr;
    const uint8_t mode = transfer ? ToyTaskNet::task_mode(transfer->task_id) : 0;

    double bpp_sum = 0, est_sum = 0, quality_sum = 0;
    int correct = 0;
    for (size_t i = 0; i < n_images; ++i) {
      const auto& sample = data.at(i);
      ImageF img;
      img.pixels = sample.image;
      img.orig_h = sample.image.dim(0);
      img.orig_w = sample.image.dim(1);
      auto stream = coder.compress(img, tm, mode, uint8_t(base.lambda_index));
      const auto bytes = serialize_bitstream(stream);
      bpp_sum += double(bytes.size()) * 8.0 / (double(img.orig_h) * double(img.orig_w));
      const auto est = coder.last_estimate();
      est_sum += (est.y_bits + est.z_bits) / (double(img.orig_h) * double(img.orig_w));
      auto decoded = coder.decompress(stream, tm);
      if (tasknet) {
        if (tasknet->predict(decoded.pixels) == sample.label) ++correct;
      } else {
        quality_sum += psnr(sample.image, decoded.pixels);
      }
    }

    if (params_digest(base.codec->params()) != digest_before) {
      throw std::runtime_error("evaluate: checkpoint parameters mutated during evaluation");
    }

    EvalPointDetail d;
    d.lambda = transfer ? transfer->lambda : base.lambda;
    d.lambda_index = base.lambda_index;
    d.mean_bpp = bpp_sum / double(n_images);
    d.mean_bpp_estimate = est_sum / double(n_images);
    d.images = int(n_images);
    d.quality = tasknet ? 100.0 * double(correct) / double(n_images)
                        : quality_sum / double(n_images);
    rep.details.push_back(d);

    RDPoint p;
    p.bpp = d.mean_bpp;
    p.quality = d.quality;
    p.label = "lambda=" + std::to_string(d.lambda);
    rep.curve.points.push_back(p);
  }
  rep.curve.sort_by_bpp();
  return rep;
}

}  // namespace ttic
