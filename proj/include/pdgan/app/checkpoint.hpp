/*
 * Copyright 2026 The pdgan Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pdgan/params.hpp"

namespace pdgan::app {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Named tensors plus the resolved config that produced them.
///
/// Layout, little-endian: "PDGN", u32 version, u32 config length, config
/// bytes, u32 tensor count, then per tensor u16 name length, name, u8 ndim,
/// u32 dims, f64 payload; finally u32 CRC32 of everything before it.
struct Checkpoint {
  std::string config_text;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
/// Throws ChecksumError on a CRC mismatch, DataError on structural damage.
Checkpoint decode_checkpoint(std::string_view bytes, const std::string& origin = "<checkpoint>");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Appends every parameter of store, in store order.
void append_params(Checkpoint& ckpt, const ParamStore& store);
/// Copies tensors into store by name. Every store parameter must be present
/// with its exact shape.
void restore_params(ParamStore& store, const Checkpoint& ckpt);

}  // namespace pdgan::app
