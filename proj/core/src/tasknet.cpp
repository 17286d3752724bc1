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

#include "ttic/tasknet.hpp"

#include <json.hpp>

#include "ttic/checkpoint.hpp"

namespace ttic {

using nlohmann::json;

ToyTaskNet::ToyTaskNet(std::string arch, int classes, uint64_t seed)
    : arch_(std::move(arch)), classes_(classes) {
  Rng rng(seed);
  if (arch_ == "A") {
    convs_.emplace_back(store_, "s1", 3, 16, 3, 2, rng);
    convs_.emplace_back(store_, "s2", 16, 32, 3, 2, rng);
    convs_.emplace_back(store_, "s3", 32, 48, 3, 2, rng);
    convs_.emplace_back(store_, "s4", 48, 64, 3, 2, rng);
    head_ = LinearLayer<float>(store_, "head", 64, classes, rng);
  } else if (arch_ == "B") {
    convs_.emplace_back(store_, "s1", 3, 12, 5, 2, rng);
    convs_.emplace_back(store_, "s2", 12, 24, 3, 2, rng);
    convs_.emplace_back(store_, "s3", 24, 48, 3, 2, rng);
    head_ = LinearLayer<float>(store_, "head", 48, classes, rng);
  } else {
    throw std::invalid_argument("unknown tasknet architecture: " + arch_);
  }
}

uint8_t ToyTaskNet::task_mode(const std::string& task_id) {
  if (task_id == "A") return 1;
  if (task_id == "B") return 2;
  throw std::invalid_argument("unknown task id: " + task_id);
}

std::vector<Var<float>> ToyTaskNet::features(const Var<float>& x) const {
  std::vector<Var<float>> taps;
  Var<float> f = x;
  for (const auto& conv : convs_) {
    f = relu(conv.forward(f));
    taps.push_back(f);
  }
  return taps;
}

Var<float> ToyTaskNet::logits(const Var<float>& x) const {
  auto taps = features(x);
  auto pooled = adaptive_avg_pool2d(taps.back(), 1, 1);
  const int c = pooled->value.dim(2);
  return head_.forward(reshape(pooled, {1, c}));
}

int ToyTaskNet::predict(const Tensor<float>& image) const {
  auto lg = logits(constant(image));
  int best = 0;
  for (int i = 1; i < classes_; ++i) {
    if (lg->value.at(0, i) > lg->value.at(0, best)) best = i;
  }
  return best;
}

namespace {

Var<float> cross_entropy(const ToyTaskNet& net, const Tensor<float>& image, int label) {
  auto lg = net.logits(constant(image));
  auto sm = softmax_last(lg);
  Tensor<float> onehot({1, net.classes()});
  onehot.at(0, label) = 1.0f;
  auto p = sum_all(mul(sm, constant(std::move(onehot))));
  return scale(log_op(clamp_min(p, 1e-12f)), -1.0f);
}

}  // namespace

double tasknet_accuracy(const ToyTaskNet& net, const Dataset& data) {
  if (data.size() == 0) return 0;
  int correct = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    if (net.predict(data.at(i).image) == data.at(i).label) ++correct;
  }
  return double(correct) / double(data.size());
}

TaskNetTrainResult train_toy_tasknet(ToyTaskNet& net, const Dataset& train, const Dataset& val,
                                     double min_val_accuracy, int max_epochs, uint64_t seed,
                                     double target_accuracy) {
  if (train.size() == 0) throw std::runtime_error("tasknet training: empty dataset");
  const double stop_at = std::max(min_val_accuracy, target_accuracy);
  AdamOptimizer<float>::Config cfg;
  cfg.lr = 1e-3;
  cfg.clip_norm = 5.0;
  AdamOptimizer<float> opt(cfg);
  net.params().set_all_trainable(true);
  opt.bind(net.params().trainable());

  const int batch = 16;
  TaskNetTrainResult res;
  int64_t step = 0;
  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    Rng order_rng(derive_seed(seed, "tasknet-epoch", uint64_t(epoch)));
    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);

    int correct = 0;
    for (size_t pos = 0; pos < order.size();) {
      opt.zero_grads();
      const size_t take = std::min<size_t>(batch, order.size() - pos);
      for (size_t b = 0; b < take; ++b, ++pos) {
        const auto& s = train.at(order[pos]);
        auto loss = scale(cross_entropy(net, s.image, s.label), 1.0f / float(take));
        backward(loss);
        if (net.predict(s.image) == s.label) ++correct;
      }
      opt.step(step++);
    }
    res.train_accuracy = double(correct) / double(train.size());
    res.val_accuracy = tasknet_accuracy(net, val);
    res.epochs = epoch + 1;
    if (res.val_accuracy >= stop_at && epoch >= 1) break;
  }
  net.params().set_all_trainable(false);
  if (res.val_accuracy < min_val_accuracy) {
    throw std::runtime_error(
        "tasknet accuracy floor unmet: reached " + std::to_string(res.val_accuracy) +
        " < " + std::to_string(min_val_accuracy) +
        "; increase max_epochs or enlarge the training corpus");
  }
  return res;
}

void save_tasknet(const std::string& path, const ToyTaskNet& net, double val_accuracy) {
  json meta;
  meta["arch"] = net.arch();
  meta["classes"] = net.classes();
  meta["val_accuracy"] = val_accuracy;
  save_checkpoint(path, {"tasknet", meta.dump()}, net.params());
}

ToyTaskNet load_tasknet(const std::string& path) {
  auto ck = read_checkpoint(path);
  if (ck.meta.kind != "tasknet") {
    throw std::runtime_error("not a tasknet checkpoint: " + path);
  }
  const json meta = json::parse(ck.meta.json);
  ToyTaskNet net(meta.at("arch").get<std::string>(), meta.at("classes").get<int>(), 0);
  apply_checkpoint(ck, net.params());
  net.params().set_all_trainable(false);
  return net;
}

}  // namespace ttic
