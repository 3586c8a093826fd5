// src/checkpoint.cpp

// Copyright 2026  The textmdd Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "mdd/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <set>

#include "mdd/error.hpp"
#include "mdd/le_io.hpp"

namespace mdd {

namespace {
constexpr char kMagic[4] = {'M', 'D', 'D', 'C'};
constexpr std::string_view kOptimPrefix = "optim.";
}  // namespace

const Checkpoint::Entry *Checkpoint::find(const std::string &name) const {
  for (const auto &e : tensors)
    if (e.name == name) return &e;
  return nullptr;
}

void save_checkpoint(const std::string &path, const Checkpoint &ckpt) {
  const bool f64 = ckpt.dtype == nd::Precision::kFloat64;
  const std::size_t elem = f64 ? 8 : 4;
  le::Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(ckpt.config);
  w.u32(ckpt.epoch);
  w.f64(ckpt.dev_f);
  w.f64(ckpt.dev_per);
  w.u8(f64 ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  std::uint64_t offset = 0;
  for (const auto &e : ckpt.tensors) {
    if (nd::NumElements(e.shape) != e.values.size())
      throw UsageError("checkpoint tensor '" + e.name + "' has inconsistent shape");
    w.str(e.name);
    w.u32(static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) w.u32(static_cast<std::uint32_t>(d));
    w.u64(offset);
    offset += e.values.size() * elem;
  }
  for (const auto &e : ckpt.tensors)
    for (double v : e.values) {
      if (f64)
        w.f64(v);
      else
        w.f32(static_cast<float>(v));
    }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
  if (!out) throw DataError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    le::Reader r(bytes.data(), bytes.size());
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw DataError("not a checkpoint");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
      throw DataError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
    Checkpoint c;
    c.config = r.str();
    c.epoch = r.u32();
    c.dev_f = r.f64();
    c.dev_per = r.f64();
    const std::uint8_t dtype = r.u8();
    if (dtype > 1) throw DataError("unknown payload dtype " + std::to_string(dtype));
    c.dtype = dtype == 1 ? nd::Precision::kFloat64 : nd::Precision::kFloat32;
    const std::size_t elem = dtype == 1 ? 8 : 4;
    const std::uint32_t count = r.u32();
    std::vector<std::uint64_t> offsets;
    std::set<std::string> names;
    std::uint64_t expected = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
      Checkpoint::Entry e;
      e.name = r.str();
      if (!names.insert(e.name).second) throw DataError("duplicate tensor '" + e.name + "'");
      const std::uint32_t rank = r.u32();
      if (rank > 8) throw DataError("tensor '" + e.name + "' has implausible rank");
      for (std::uint32_t k = 0; k < rank; ++k) e.shape.push_back(r.u32());
      const std::uint64_t off = r.u64();
      if (off != expected) throw DataError("tensor '" + e.name + "' has a bad payload offset");
      expected += nd::NumElements(e.shape) * elem;
      c.tensors.push_back(std::move(e));
    }
    if (r.remaining() != expected)
      throw DataError("payload is " + std::to_string(r.remaining()) + " bytes, index says " + std::to_string(expected));
    for (auto &e : c.tensors) {
      e.values.resize(nd::NumElements(e.shape));
      for (auto &v : e.values) v = dtype == 1 ? r.f64() : static_cast<double>(r.f32());
    }
    return c;
  } catch (const DataError &e) {
    throw DataError("checkpoint " + path + ": " + e.what());
  }
}

void CaptureModel(const Model &model, Checkpoint &ckpt) {
  const auto &params = model.params();
  for (const auto &name : params.names()) {
    const nd::Tensor &t = params.get(name);
    ckpt.tensors.push_back({name, t.shape(), std::vector<double>(t.data().begin(), t.data().end())});
  }
}

void RestoreModel(const Checkpoint &ckpt, Model &model) {
  auto &params = model.params();
  for (const auto &e : ckpt.tensors) {
    if (e.name.starts_with(kOptimPrefix)) continue;
    if (!params.contains(e.name)) throw DataError("checkpoint tensor '" + e.name + "' is not a model parameter");
  }
  for (const auto &name : params.names()) {
    const auto *e = ckpt.find(name);
    if (!e) throw DataError("checkpoint lacks tensor '" + name + "'");
    nd::Tensor &t = params.get(name);
    if (e->shape != t.shape())
      throw DataError("checkpoint tensor '" + name + "' has shape " + nd::ShapeString(e->shape) + ", model expects " +
                      nd::ShapeString(t.shape()));
  }
  for (const auto &name : params.names()) {
    const auto *e = ckpt.find(name);
    auto dst = params.get(name).mutable_data();
    std::copy(e->values.begin(), e->values.end(), dst.begin());
  }
}

}  // namespace mdd
