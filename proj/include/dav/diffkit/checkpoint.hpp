// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "dav/diffkit/binary_io.hpp"
#include "dav/diffkit/tape.hpp"

namespace dav {

inline constexpr std::string_view kCheckpointMagic = "DAVCKPT1";

// Layout: magic, u32 entry count, then per entry {u32 name length, name,
// u32 rank, u32 dims[rank], u64 element offset}, then all values as f32.
template <typename T>
void save_checkpoint(const std::string& path, const ParameterSet<T>& params) {
  io::Writer w(path);
  w.magic(kCheckpointMagic);
  w.u32(static_cast<std::uint32_t>(params.size()));
  std::uint64_t offset = 0;
  for (const auto& [name, e] : params) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(e.value.rank()));
    for (auto d : e.value.shape()) w.u32(static_cast<std::uint32_t>(d));
    w.u64(offset);
    offset += e.value.numel();
  }
  for (const auto& [_, e] : params) {
    for (auto v : e.value.values()) w.f32(static_cast<float>(v));
  }
  w.close();
}

template <typename T = float>
ParameterSet<T> load_checkpoint(const std::string& path) {
  io::Reader r(path);
  r.expect_magic(kCheckpointMagic);
  struct Item {
    std::string name;
    Shape shape;
    std::uint64_t offset;
  };
  std::vector<Item> items(r.u32());
  std::uint64_t expected = 0;
  for (auto& it : items) {
    it.name = r.str();
    const auto rank = r.u32();
    if (rank > 8) throw std::runtime_error("'" + path + "': parameter '" + it.name + "' has rank " + std::to_string(rank));
    for (std::uint32_t i = 0; i < rank; ++i) it.shape.push_back(r.u32());
    it.offset = r.u64();
    if (it.offset != expected) throw std::runtime_error("'" + path + "': inconsistent offset for '" + it.name + "'");
    expected += shape_numel(it.shape);
  }
  ParameterSet<T> params;
  for (const auto& it : items) {
    std::vector<T> data(shape_numel(it.shape));
    for (auto& v : data) v = static_cast<T>(r.f32());
    params.add(it.name, Tensor<T>(it.shape, std::move(data)));
  }
  if (!r.at_end()) throw std::runtime_error("'" + path + "' has trailing bytes");
  return params;
}

}  // namespace dav
