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

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pdgan/params.hpp"

namespace pdgan::parts {

inline constexpr int kPartCount = 8;

enum class Part : int {
  kHair = 0,
  kUpperClothes,
  kDress,
  kPants,
  kFace,
  kUpperSkin,
  kLeg,
  kBackground,
};

inline constexpr std::array<std::string_view, kPartCount> kPartNames = {
    "hair", "upper-clothes", "dress", "pants", "face", "upper-skin", "leg", "background"};

/// Returns the canonical index for a part name; throws UsageError otherwise.
int part_index(std::string_view name);

/// Eight binary masks, 8×H×W, in canonical order.
class PartMaskSet {
 public:
  PartMaskSet() = default;
  /// Throws DataError unless every pixel has exactly one active mask.
  explicit PartMaskSet(Tensor masks);

  /// One label in [0, 8) per pixel, row-major.
  static PartMaskSet from_labels(const std::vector<std::uint8_t>& labels, int height, int width);
  std::vector<std::uint8_t> labels() const;

  const Tensor& masks() const { return masks_; }
  int height() const { return masks_.dim(1); }
  int width() const { return masks_.dim(2); }
  Tensor mask(int part) const;  // H×W
  std::size_t pixel_count(int part) const;

  bool operator==(const PartMaskSet&) const = default;

 private:
  Tensor masks_;
};

/// Throws DataError naming the first offending pixel.
void validate_partition(const Tensor& masks);

/// I_R^i = I_R ⊙ M_i, one 3×H×W image per canonical part.
std::vector<Tensor> decouple(const Tensor& image, const PartMaskSet& masks);

struct PartEncoderConfig {
  std::vector<int> active_parts = {0, 1, 2, 3, 4, 5, 6, 7};
  int hidden = 32;
  int feature = 64;
  int texture_dim = 128;
};

struct PartEncoderParams {
  std::vector<int> active_parts;
  int feature = 0;
  int texture_dim = 0;
  // Shared by every part branch.
  ParamId conv1_w, conv1_b, conv2_w, conv2_b;
  // 1×1 fusion over the concatenated branch features.
  ParamId fuse_w, fuse_b;
};

PartEncoderParams make_part_encoder(ParamStore& store, const std::string& prefix,
                                    const PartEncoderConfig& cfg, Rng& rng);

/// Runs the shared encoder on each active part image (3×H×W, H and W
/// divisible by 4). Returns one feature×H/4×W/4 map per active part.
std::vector<Var> encode_parts(ParamBinding& bind, const PartEncoderParams& p,
                              const std::vector<Var>& part_images);

/// Channel concat, 1×1 conv, then global average pool to F_C (length S).
Var fuse(ParamBinding& bind, const PartEncoderParams& p, const std::vector<Var>& features);

/// decouple → encode_parts → fuse, restricted to the active parts.
Var texture_code(ParamBinding& bind, const PartEncoderParams& p, const Tensor& image,
                 const PartMaskSet& masks);

}  // namespace pdgan::parts
