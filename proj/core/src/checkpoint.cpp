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

#include "ttic/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace ttic {

uint64_t fnv1a(const void* data, size_t len, uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

uint64_t digest_tensor(uint64_t h, const std::string& name, const Tensor<float>& t) {
  h = fnv1a(name.data(), name.size(), h);
  for (int d : t.shape()) {
    const uint32_t v = uint32_t(d);
    h = fnv1a(&v, sizeof(v), h);
  }
  return fnv1a(t.data(), size_t(t.size()) * sizeof(float), h);
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void put_u32(std::ofstream& f, uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), 4);
}
uint32_t get_u32(std::ifstream& f) {
  uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), 4);
  if (!f) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace

std::string params_digest(const ParamStore<float>& ps) {
  uint64_t h = 1469598103934665603ull;
  for (const auto& [name, v] : ps.items()) h = digest_tensor(h, name, v->value);
  return hex64(h);
}

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const ParamStore<float>& params,
                     const std::vector<std::pair<std::string, Tensor<float>>>& extra) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path);
  f.write("TTCK", 4);
  put_u32(f, 1);  // version
  put_u32(f, uint32_t(meta.kind.size()));
  f.write(meta.kind.data(), long(meta.kind.size()));
  put_u32(f, uint32_t(meta.json.size()));
  f.write(meta.json.data(), long(meta.json.size()));

  const uint32_t count = uint32_t(params.items().size() + extra.size());
  put_u32(f, count);
  uint64_t digest = 1469598103934665603ull;
  auto write_tensor = [&](const std::string& name, const Tensor<float>& t) {
    put_u32(f, uint32_t(name.size()));
    f.write(name.data(), long(name.size()));
    put_u32(f, uint32_t(t.rank()));
    for (int d : t.shape()) put_u32(f, uint32_t(d));
    f.write(reinterpret_cast<const char*>(t.data()), long(t.size()) * 4);
    digest = digest_tensor(digest, name, t);
  };
  for (const auto& [name, v] : params.items()) write_tensor(name, v->value);
  for (const auto& [name, t] : extra) write_tensor(name, t);
  const std::string dg = hex64(digest);
  put_u32(f, uint32_t(dg.size()));
  f.write(dg.data(), long(dg.size()));
  if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

LoadedCheckpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read checkpoint: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "TTCK", 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  const uint32_t version = get_u32(f);
  if (version != 1) throw std::runtime_error("checkpoint: unsupported version");
  LoadedCheckpoint out;
  const uint32_t klen = get_u32(f);
  out.meta.kind.resize(klen);
  f.read(out.meta.kind.data(), klen);
  const uint32_t jlen = get_u32(f);
  out.meta.json.resize(jlen);
  f.read(out.meta.json.data(), jlen);
  const uint32_t count = get_u32(f);
  uint64_t digest = 1469598103934665603ull;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t nlen = get_u32(f);
    std::string name(nlen, '\0');
    f.read(name.data(), nlen);
    const uint32_t rank = get_u32(f);
    std::vector<int> shape(rank);
    for (uint32_t d = 0; d < rank; ++d) shape[d] = int(get_u32(f));
    Tensor<float> t(shape);
    f.read(reinterpret_cast<char*>(t.data()), long(t.size()) * 4);
    if (!f) throw std::runtime_error("checkpoint: truncated tensor data");
    digest = digest_tensor(digest, name, t);
    out.tensors.emplace_back(std::move(name), std::move(t));
  }
  const uint32_t dlen = get_u32(f);
  std::string stored(dlen, '\0');
  f.read(stored.data(), dlen);
  if (!f || stored != hex64(digest)) {
    throw std::runtime_error("checkpoint: digest mismatch (corrupt file?) " + path);
  }
  return out;
}

void apply_checkpoint(const LoadedCheckpoint& ck, ParamStore<float>& params, bool allow_extra) {
  size_t applied = 0;
  for (const auto& [name, t] : ck.tensors) {
    auto v = params.find(name);
    if (!v) {
      if (allow_extra && name.rfind("opt.", 0) == 0) continue;
      if (allow_extra) continue;
      throw std::runtime_error("checkpoint: unexpected tensor " + name);
    }
    if (v->value.shape() != t.shape()) {
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    }
    v->value = t;
    ++applied;
  }
  if (applied != params.items().size()) {
    throw std::runtime_error("checkpoint: missing tensors (" + std::to_string(applied) + " of " +
                             std::to_string(params.items().size()) + " applied)");
  }
}

}  // namespace ttic
