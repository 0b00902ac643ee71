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

#include "pdgan/losses.hpp"

#include <cmath>

#include "pdgan/errors.hpp"

namespace pdgan::losses {
namespace {

constexpr int kWidths[FrozenFeatureNet::kStages + 1] = {3, 16, 32, 64, 64};

void require_same_shape(const Var& a, const Var& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

Var mean_over_scales(const std::vector<Var>& per_scale) {
  Var acc = per_scale.front();
  for (std::size_t s = 1; s < per_scale.size(); ++s) acc = add(acc, per_scale[s]);
  return scale(acc, 1.0 / static_cast<double>(per_scale.size()));
}

void check_finite(const Var& v, const char* name) {
  if (!v.value().all_finite()) {
    throw NumericError(std::string("loss term '") + name + "' is not finite");
  }
}

}  // namespace

FrozenFeatureNet::FrozenFeatureNet(std::uint64_t seed) : seed_(seed) {
  Rng rng(seed);
  for (int s = 0; s < kStages; ++s) {
    convs_.push_back(add_conv_weight(store_, "frozen.stage" + std::to_string(s), kWidths[s + 1],
                                     kWidths[s], 3, rng));
  }
}

std::vector<Var> FrozenFeatureNet::features(const Var& image) const {
  Tape& tape = image.tape();
  std::vector<Var> out;
  Var x = image;
  for (ParamId w : convs_) {
    x = avg_pool2x(relu(conv2d(x, tape.constant(store_.value(w)), std::nullopt, 1)));
    out.push_back(x);
  }
  return out;
}

std::vector<Tensor> FrozenFeatureNet::features(const Tensor& image) const {
  Tape tape;
  std::vector<Tensor> out;
  for (const Var& f : features(tape.constant(image))) out.push_back(f.value());
  return out;
}

Var l1_loss(const Var& generated, const Var& target) {
  require_same_shape(generated, target, "l1_loss");
  return mean(abs(sub(generated, target)));
}

Var adv_loss_d(const std::vector<Var>& real_logits, const std::vector<Var>& fake_logits) {
  if (real_logits.empty() || real_logits.size() != fake_logits.size()) {
    throw ShapeError("adv_loss_d needs matching, nonempty scale lists");
  }
  std::vector<Var> per_scale;
  for (std::size_t s = 0; s < real_logits.size(); ++s) {
    per_scale.push_back(
        add(mean(softplus(scale(real_logits[s], -1.0))), mean(softplus(fake_logits[s]))));
  }
  return mean_over_scales(per_scale);
}

Var adv_loss_g(const std::vector<Var>& fake_logits) {
  if (fake_logits.empty()) throw ShapeError("adv_loss_g needs at least one scale");
  std::vector<Var> per_scale;
  for (const Var& z : fake_logits) per_scale.push_back(mean(softplus(scale(z, -1.0))));
  return mean_over_scales(per_scale);
}

Var feature_l1(const std::vector<Var>& a, const std::vector<Var>& b) {
  if (a.empty() || a.size() != b.size()) throw ShapeError("feature lists differ in length");
  Var acc = l1_loss(a[0], b[0]);
  for (std::size_t i = 1; i < a.size(); ++i) acc = add(acc, l1_loss(a[i], b[i]));
  return acc;
}

Var perceptual_loss(const FrozenFeatureNet& net, const Var& generated, const Var& target) {
  require_same_shape(generated, target, "perceptual_loss");
  return feature_l1(net.features(target), net.features(generated));
}

Var gram(const Var& features) {
  if (features.value().ndim() != 3) {
    throw ShapeError("gram expects C×H×W, got " + shape_str(features.shape()));
  }
  const int c = features.dim(0), hw = features.dim(1) * features.dim(2);
  Var flat = reshape(features, {c, hw});
  return scale(matmul(flat, transpose(flat)), 1.0 / (static_cast<double>(c) * hw));
}

Var gram_l1(const std::vector<Var>& a, const std::vector<Var>& b) {
  if (a.empty() || a.size() != b.size()) throw ShapeError("feature lists differ in length");
  Var acc = l1_loss(gram(a[0]), gram(b[0]));
  for (std::size_t i = 1; i < a.size(); ++i) acc = add(acc, l1_loss(gram(a[i]), gram(b[i])));
  return acc;
}

Var style_loss(const FrozenFeatureNet& net, const Var& generated, const Var& target) {
  require_same_shape(generated, target, "style_loss");
  return gram_l1(net.features(target), net.features(generated));
}

std::optional<CropBox> crop_box(const Tensor& mask, int margin) {
  if (mask.ndim() != 2) throw ShapeError("crop_box expects an H×W mask");
  const int h = mask.dim(0), w = mask.dim(1);
  int top = h, bottom = -1, left = w, right = -1;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      if (mask.at(i, j) != 0.0) {
        top = std::min(top, i);
        bottom = std::max(bottom, i);
        left = std::min(left, j);
        right = std::max(right, j);
      }
  if (bottom < 0) return std::nullopt;
  top = std::max(0, top - margin);
  left = std::max(0, left - margin);
  bottom = std::min(h - 1, bottom + margin);
  right = std::min(w - 1, right + margin);
  return CropBox{top, left, bottom - top + 1, right - left + 1};
}

Var partial_loss(const FrozenFeatureNet& net, const Var& generated, const Var& target,
                 const parts::PartMaskSet& target_masks, const PartialLossConfig& cfg) {
  require_same_shape(generated, target, "partial_loss");
  std::optional<Var> acc;
  for (int part = 0; part < parts::kPartCount; ++part) {
    const std::optional<CropBox> box = crop_box(target_masks.mask(part), cfg.margin);
    if (!box) continue;
    Var term = feature_l1(net.features(crop_resize(target, *box, cfg.crop_size, cfg.crop_size)),
                          net.features(crop_resize(generated, *box, cfg.crop_size, cfg.crop_size)));
    acc = acc ? add(*acc, term) : term;
  }
  // The masks partition the image, so at least one part is present.
  return *acc;
}

Var total_loss(const LossTerms& t, const LossWeights& w) {
  const Var* terms[] = {&t.l1, &t.adv, &t.per, &t.style, &t.par};
  for (int i = 0; i < 5; ++i) check_finite(*terms[i], kTermNames[i]);
  Var total = add(add(add(add(scale(t.l1, w.l1), scale(t.adv, w.adv)), scale(t.per, w.per)),
                      scale(t.style, w.style)),
                  scale(t.par, w.par));
  check_finite(total, "total");
  return total;
}

double total_loss(const std::vector<double>& terms, const LossWeights& w) {
  if (terms.size() != 5) throw ShapeError("total_loss expects five terms");
  for (int i = 0; i < 5; ++i) {
    if (!std::isfinite(terms[i])) {
      throw NumericError(std::string("loss term '") + kTermNames[i] + "' is not finite");
    }
  }
  return w.l1 * terms[0] + w.adv * terms[1] + w.per * terms[2] + w.style * terms[3] +
         w.par * terms[4];
}

}  // namespace pdgan::losses
