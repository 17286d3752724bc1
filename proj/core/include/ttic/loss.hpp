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

#ifndef TTIC_LOSS_HPP_
#define TTIC_LOSS_HPP_

#include <stdexcept>
#include <vector>

#include "ttic/entropy.hpp"

namespace ttic {

inline constexpr double kLn2 = 0.69314718055994530942;

// Tapped feature pyramid of a frozen recognition network.
template <typename T>
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<Var<T>> features(const Var<T>& x) const = 0;
};

template <typename T>
Var<T> mse_distortion(const Var<T>& x, const Var<T>& x_hat) {
  return mse_loss(x, x_hat);
}

// Mean over tapped layers of the feature-space MSE. Per-layer weights default
// to uniform 1/L. Gradients reach x_hat only when the extractor parameters
// are frozen, which the transfer trainer enforces.
template <typename T>
Var<T> perceptual_distortion(const Var<T>& x, const Var<T>& x_hat,
                             const FeatureExtractor<T>& extractor,
                             const std::vector<double>& layer_weights = {}) {
  auto fx = extractor.features(x);
  auto fy = extractor.features(x_hat);
  if (fx.empty() || fx.size() != fy.size()) {
    throw StructuralError("perceptual_distortion: extractor must tap at least one layer");
  }
  if (!layer_weights.empty() && layer_weights.size() != fx.size()) {
    throw StructuralError("perceptual_distortion: layer weight count mismatch");
  }
  const double uniform = 1.0 / double(fx.size());
  Var<T> acc;
  for (size_t l = 0; l < fx.size(); ++l) {
    const double w = layer_weights.empty() ? uniform : layer_weights[l];
    auto term = scale(mse_loss(fx[l], fy[l]), T(w));
    acc = acc ? add(acc, term) : term;
  }
  return acc;
}

// Rate-distortion cost: rate in nats internally, bits reported separately.
template <typename T>
struct RDCost {
  Var<T> total;        // -ln p(z) - ln p(y|z) + lambda * distortion
  double rate_bits = 0.0;
  double distortion = 0.0;
  double lambda = 0.0;
  double total_value = 0.0;
};

template <typename T>
RDCost<T> rd_loss(const Var<T>& y_probs, const Var<T>& z_probs, const Var<T>& distortion,
                  double lambda) {
  if (lambda <= 0) throw std::domain_error("rd_loss: lambda must be positive");
  for (int64_t i = 0; i < y_probs->value.size(); ++i) {
    if (!(y_probs->value[i] > T(0)) || y_probs->value[i] > T(1)) {
      throw std::domain_error("rd_loss: invalid y probability");
    }
  }
  for (int64_t i = 0; i < z_probs->value.size(); ++i) {
    if (!(z_probs->value[i] > T(0)) || z_probs->value[i] > T(1)) {
      throw std::domain_error("rd_loss: invalid z probability");
    }
  }
  auto bits = add(estimate_rate_bits(y_probs), estimate_rate_bits(z_probs));
  RDCost<T> out;
  out.total = add(scale(bits, T(kLn2)), scale(distortion, T(lambda)));
  out.rate_bits = double(bits->value[0]);
  out.distortion = double(distortion->value[0]);
  out.lambda = lambda;
  out.total_value = double(out.total->value[0]);
  return out;
}

}  // namespace ttic

#endif  // TTIC_LOSS_HPP_
