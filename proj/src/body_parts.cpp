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

#include "pdgan/body_parts.hpp"

#include <cmath>

#include "pdgan/errors.hpp"
#include "pdgan/ops.hpp"

namespace pdgan::parts {

int part_index(std::string_view name) {
  for (int i = 0; i < kPartCount; ++i) {
    if (kPartNames[i] == name) return i;
  }
  throw UsageError("unknown body part '" + std::string(name) + "'");
}

void validate_partition(const Tensor& masks) {
  if (masks.ndim() != 3 || masks.dim(0) != kPartCount) {
    throw DataError("part masks must be 8×H×W, got " + shape_str(masks.shape()));
  }
  const int h = masks.dim(1), w = masks.dim(2);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      int active = 0;
      for (int c = 0; c < kPartCount; ++c) {
        const double m = masks.at(c, i, j);
        if (m != 0.0 && m != 1.0) {
          throw DataError("part mask " + std::string(kPartNames[c]) + " is not binary at (" +
                          std::to_string(i) + ", " + std::to_string(j) + ")");
        }
        active += m == 1.0;
      }
      if (active != 1) {
        throw DataError("pixel (" + std::to_string(i) + ", " + std::to_string(j) + ") belongs to " +
                        std::to_string(active) + " parts");
      }
    }
}

PartMaskSet::PartMaskSet(Tensor masks) : masks_(std::move(masks)) { validate_partition(masks_); }

PartMaskSet PartMaskSet::from_labels(const std::vector<std::uint8_t>& labels, int height,
                                     int width) {
  if (labels.size() != static_cast<std::size_t>(height) * width) {
    throw DataError("label map has " + std::to_string(labels.size()) + " entries, expected " +
                    std::to_string(height * width));
  }
  Tensor m({kPartCount, height, width});
  for (int p = 0; p < height * width; ++p) {
    if (labels[p] >= kPartCount) {
      throw DataError("part label " + std::to_string(labels[p]) + " out of range at pixel " +
                      std::to_string(p));
    }
    m[static_cast<std::size_t>(labels[p]) * height * width + p] = 1.0;
  }
  return PartMaskSet(std::move(m));
}

std::vector<std::uint8_t> PartMaskSet::labels() const {
  const int hw = height() * width();
  std::vector<std::uint8_t> out(hw, 0);
  for (int c = 0; c < kPartCount; ++c)
    for (int p = 0; p < hw; ++p)
      if (masks_[static_cast<std::size_t>(c) * hw + p] == 1.0) out[p] = static_cast<std::uint8_t>(c);
  return out;
}

Tensor PartMaskSet::mask(int part) const {
  const int hw = height() * width();
  Tensor out({height(), width()});
  std::copy_n(masks_.data() + static_cast<std::size_t>(part) * hw, hw, out.data());
  return out;
}

std::size_t PartMaskSet::pixel_count(int part) const {
  const Tensor m = mask(part);
  std::size_t n = 0;
  for (double v : m.values()) n += v == 1.0;
  return n;
}

std::vector<Tensor> decouple(const Tensor& image, const PartMaskSet& masks) {
  if (image.ndim() != 3 || image.dim(0) != 3 || image.dim(1) != masks.height() ||
      image.dim(2) != masks.width()) {
    throw ShapeError("decouple: image " + shape_str(image.shape()) + " vs masks " +
                     shape_str(masks.masks().shape()));
  }
  const int hw = masks.height() * masks.width();
  std::vector<Tensor> out;
  out.reserve(kPartCount);
  for (int part = 0; part < kPartCount; ++part) {
    Tensor piece(image.shape());
    const double* m = masks.masks().data() + static_cast<std::size_t>(part) * hw;
    for (int c = 0; c < 3; ++c)
      for (int p = 0; p < hw; ++p) piece[c * hw + p] = image[c * hw + p] * m[p];
    out.push_back(std::move(piece));
  }
  return out;
}

PartEncoderParams make_part_encoder(ParamStore& store, const std::string& prefix,
                                    const PartEncoderConfig& cfg, Rng& rng) {
  if (cfg.active_parts.empty()) throw UsageError("at least one body part must stay active");
  std::vector<bool> seen(kPartCount, false);
  for (int part : cfg.active_parts) {
    if (part < 0 || part >= kPartCount || seen[part]) {
      throw UsageError("invalid or repeated part index " + std::to_string(part));
    }
    seen[part] = true;
  }
  PartEncoderParams p;
  p.active_parts = cfg.active_parts;
  p.feature = cfg.feature;
  p.texture_dim = cfg.texture_dim;
  p.conv1_w = add_conv_weight(store, prefix + ".conv1.w", cfg.hidden, 3, 3, rng);
  p.conv1_b = add_filled(store, prefix + ".conv1.b", {cfg.hidden}, 0.0);
  p.conv2_w = add_conv_weight(store, prefix + ".conv2.w", cfg.feature, cfg.hidden, 3, rng);
  p.conv2_b = add_filled(store, prefix + ".conv2.b", {cfg.feature}, 0.0);
  const int fused_in = cfg.feature * static_cast<int>(cfg.active_parts.size());
  p.fuse_w = add_conv_weight(store, prefix + ".fuse.w", cfg.texture_dim, fused_in, 1, rng);
  p.fuse_b = add_filled(store, prefix + ".fuse.b", {cfg.texture_dim}, 0.0);
  return p;
}

std::vector<Var> encode_parts(ParamBinding& bind, const PartEncoderParams& p,
                              const std::vector<Var>& part_images) {
  if (part_images.size() != p.active_parts.size()) {
    throw ShapeError("encode_parts expects " + std::to_string(p.active_parts.size()) +
                     " part images, got " + std::to_string(part_images.size()));
  }
  std::vector<Var> out;
  out.reserve(part_images.size());
  for (const Var& img : part_images) {
    if (img.value().ndim() != 3 || img.dim(1) % 4 != 0 || img.dim(2) % 4 != 0) {
      throw ShapeError("part image " + shape_str(img.shape()) + " needs H and W divisible by 4");
    }
    Var h = relu(conv2d(img, bind(p.conv1_w), bind(p.conv1_b), 2));
    out.push_back(relu(conv2d(h, bind(p.conv2_w), bind(p.conv2_b), 2)));
  }
  return out;
}

Var fuse(ParamBinding& bind, const PartEncoderParams& p, const std::vector<Var>& features) {
  if (features.size() != p.active_parts.size()) {
    throw ShapeError("fuse expects " + std::to_string(p.active_parts.size()) + " feature maps");
  }
  for (const Var& f : features) {
    if (f.shape() != features.front().shape()) {
      throw ShapeError("fuse: feature maps " + shape_str(features.front().shape()) + " and " +
                       shape_str(f.shape()) + " differ");
    }
  }
  Var stacked = features.size() == 1 ? features.front() : concat_channels(features);
  return global_avg_pool(conv2d(stacked, bind(p.fuse_w), bind(p.fuse_b), 1));
}

Var texture_code(ParamBinding& bind, const PartEncoderParams& p, const Tensor& image,
                 const PartMaskSet& masks) {
  std::vector<Tensor> pieces = decouple(image, masks);
  std::vector<Var> active;
  active.reserve(p.active_parts.size());
  for (int part : p.active_parts) active.push_back(bind.tape().constant(std::move(pieces[part])));
  return fuse(bind, p, encode_parts(bind, p, active));
}

}  // namespace pdgan::parts
