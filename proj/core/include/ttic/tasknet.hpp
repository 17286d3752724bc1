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

#ifndef TTIC_TASKNET_HPP_
#define TTIC_TASKNET_HPP_

#include <string>
#include <vector>

#include "ttic/data.hpp"
#include "ttic/loss.hpp"
#include "ttic/nn.hpp"

namespace ttic {

// Small frozen convolutional classifier with tapped stage outputs. Two
// architectures ("A": four stages, "B": three stages with a 5x5 stem) stand
// in for the large recognition backbones.
class ToyTaskNet : public FeatureExtractor<float> {
 public:
  ToyTaskNet(std::string arch, int classes, uint64_t seed);

  std::vector<Var<float>> features(const Var<float>& x) const override;
  Var<float> logits(const Var<float>& x) const;
  int predict(const Tensor<float>& image) const;

  ParamStore<float>& params() { return store_; }
  const ParamStore<float>& params() const { return store_; }
  const std::string& arch() const { return arch_; }
  int classes() const { return classes_; }
  int stages() const { return int(convs_.size()); }

  // Bitstream mode byte for a task id ("A" -> 1, "B" -> 2).
  static uint8_t task_mode(const std::string& task_id);

 private:
  std::string arch_;
  int classes_ = 10;
  ParamStore<float> store_;
  std::vector<Conv2dLayer<float>> convs_;
  LinearLayer<float> head_;
};

struct TaskNetTrainResult {
  double train_accuracy = 0;
  double val_accuracy = 0;
  int epochs = 0;
};

// Trains until target_accuracy is reached (or max_epochs); throws with
// instructions to train longer if the min_val_accuracy floor is unmet.
// target_accuracy <= 0 stops at the floor.
TaskNetTrainResult train_toy_tasknet(ToyTaskNet& net, const Dataset& train, const Dataset& val,
                                     double min_val_accuracy, int max_epochs, uint64_t seed,
                                     double target_accuracy = 0.0);

double tasknet_accuracy(const ToyTaskNet& net, const Dataset& data);

void save_tasknet(const std::string& path, const ToyTaskNet& net, double val_accuracy);
ToyTaskNet load_tasknet(const std::string& path);

}  // namespace ttic

#endif  // TTIC_TASKNET_HPP_
