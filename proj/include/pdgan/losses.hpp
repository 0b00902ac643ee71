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
#include <optional>
#include <string>
#include <vector>

#include "pdgan/body_parts.hpp"
#include "pdgan/ops.hpp"
#include "pdgan/params.hpp"

namespace pdgan::losses {

/// Four (conv3×3, ReLU, avg-pool ×½) stages, 3→16→32→64→64, drawn once from
/// a seeded He-normal distribution and never trained.
class FrozenFeatureNet {
 public:
  static constexpr int kStages = 4;

  explicit FrozenFeatureNet(std::uint64_t seed = 42);

  /// Stage outputs after pooling, recorded on the image's tape. The weights
  /// enter as constants, so no gradient is kept for them.
  std::vector<Var> features(const Var& image) const;
  std::vector<Tensor> features(const Tensor& image) const;

  const ParamStore& store() const { return store_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  ParamStore store_;
  std::vector<ParamId> convs_;
};

Var l1_loss(const Var& generated, const Var& target);

/// Mean over scales of mean softplus(-z_real) + mean softplus(z_fake).
Var adv_loss_d(const std::vector<Var>& real_logits, const std::vector<Var>& fake_logits);
/// Non-saturating generator objective: mean over scales of mean softplus(-z_fake).
Var adv_loss_g(const std::vector<Var>& fake_logits);

/// Sum over stages of mean |a_i - b_i|.
Var feature_l1(const std::vector<Var>& a, const std::vector<Var>& b);
Var perceptual_loss(const FrozenFeatureNet& net, const Var& generated, const Var& target);

/// (C×HW)(C×HW)ᵀ / (C·H·W).
Var gram(const Var& features);
Var gram_l1(const std::vector<Var>& a, const std::vector<Var>& b);
Var style_loss(const FrozenFeatureNet& net, const Var& generated, const Var& target);

/// Bounding box of the nonzero pixels of an H×W mask, grown by margin and
/// clamped to the image. Empty mask → nullopt (part absent).
std::optional<CropBox> crop_box(const Tensor& mask, int margin = 2);

struct PartialLossConfig {
  int crop_size = 16;
  int margin = 2;
};

/// Sum over parts present in the target masks of the perceptual distance
/// between bilinear crops of the two images.
Var partial_loss(const FrozenFeatureNet& net, const Var& generated, const Var& target,
                 const parts::PartMaskSet& target_masks, const PartialLossConfig& cfg = {});

struct LossWeights {
  double l1 = 2.0;
  double adv = 0.25;
  double per = 200.0;
  double style = 2.5;
  double par = 0.5;
};

struct LossTerms {
  Var l1, adv, per, style, par;
};

inline constexpr const char* kTermNames[] = {"l1", "adv", "per", "style", "par"};

/// λ1·L1 + λ2·adv + λ3·per + λ4·style + λ5·par. Throws NumericError naming the
/// first non-finite term.
Var total_loss(const LossTerms& terms, const LossWeights& w);
double total_loss(const std::vector<double>& terms, const LossWeights& w);

}  // namespace pdgan::losses
