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

#ifndef TTIC_CHECKPOINT_HPP_
#define TTIC_CHECKPOINT_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ttic/autograd.hpp"

namespace ttic {

uint64_t fnv1a(const void* data, size_t len, uint64_t h = 1469598103934665603ull);

// Order-sensitive digest over names, shapes and raw parameter bytes.
std::string params_digest(const ParamStore<float>& ps);

// Binary container: magic "TTCK", version, JSON metadata, named tensors,
// trailing digest. Round-trips parameters exactly (raw float bits).
struct CheckpointMeta {
  std::string kind;  // "base" | "transfer" | "tasknet"
  std::string json;  // metadata document (configs, bindings, digests)
};

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const ParamStore<float>& params,
                     const std::vector<std::pair<std::string, Tensor<float>>>& extra = {});

struct LoadedCheckpoint {
  CheckpointMeta meta;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;
};

LoadedCheckpoint read_checkpoint(const std::string& path);

// Copies tensors into matching names; throws on missing names or shape
// mismatches. Extra tensors (prefix "opt.") are ignored unless requested.
void apply_checkpoint(const LoadedCheckpoint& ck, ParamStore<float>& params,
                      bool allow_extra = true);

}  // namespace ttic

#endif  // TTIC_CHECKPOINT_HPP_
