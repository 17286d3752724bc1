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

#ifndef TTIC_DATA_HPP_
#define TTIC_DATA_HPP_

#include <string>
#include <vector>

#include "ttic/image.hpp"
#include "ttic/rng.hpp"
#include "ttic/tensor.hpp"

namespace ttic {

struct DatasetSpec {
  std::string root;
  std::string split = "train";
  int crop = 64;
  bool labeled = true;
  uint64_t seed = 0;
};

struct Sample {
  Tensor<float> image;  // (h, w, 3) in [0, 1]
  int label = -1;
};

// In-memory dataset with deterministic (seed-shuffled) order. Unreadable
// files are skipped with a warning and counted.
class Dataset {
 public:
  static Dataset load(const DatasetSpec& spec);

  size_t size() const { return samples_.size(); }
  const Sample& at(size_t i) const { return samples_[i]; }
  int num_classes() const { return num_classes_; }
  int skipped() const { return skipped_; }
  const std::vector<std::string>& class_names() const { return class_names_; }

  std::vector<Sample> samples_;
  int num_classes_ = 0;
  int skipped_ = 0;
  std::vector<std::string> class_names_;
};

// size x size crop at a uniform position; replicate-pads first if the image
// is smaller than the crop.
Tensor<float> random_crop(const Tensor<float>& image, int size, Rng& rng);

// Procedurally generated 10-class corpus (textured shapes whose geometry
// decides the class). Writes root/{train,val}/<class>/*.png.
void generate_synthetic_corpus(const std::string& root, int per_class_train, int per_class_val,
                               int image_size, uint64_t seed);

const std::vector<std::string>& synthetic_class_names();

}  // namespace ttic

#endif  // TTIC_DATA_HPP_
