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

#include <optional>
#include <vector>

#include "pdgan/attention.hpp"
#include "pdgan/body_parts.hpp"
#include "pdgan/sample.hpp"

namespace pdgan::nets {

struct GeneratorConfig {
  int keypoints = 10;
  int d = 64;
  int encoder_hidden = 32;
  int heads = 2;
  int n_transformer = 2;
  int texture_dim = 128;
  int part_hidden = 32;
  int part_feature = 64;
  int decoder_hidden = 32;
  int decoder_out = 16;
  bool use_transformer = true;
  bool use_fft = true;
  bool fft_bias = true;
  bool output_projection = true;
  bool positional_encoding = false;
  std::vector<int> active_parts = {0, 1, 2, 3, 4, 5, 6, 7};
  double eps = 1e-5;
};

/// Two stride-2 3×3 conv + IN + ReLU blocks. No conv bias: IN removes it.
struct EncoderParams {
  ParamId conv1, conv2;
};

/// Stand-in for the transformer stack when it is ablated: F_T is
/// concatenated once, mixed by a 1×1 conv, then two residual blocks
/// x + ReLU(IN(conv3×3(x))).
struct NoTransformerParams {
  ParamId mix_w, mix_b;
  ParamId res1, res2;
};

/// Maps F_C to per-channel (gamma, beta); gamma's bias starts at one.
struct AffineHead {
  ParamId w_gamma, b_gamma, w_beta, b_beta;
};

struct DecoderParams {
  ParamId conv1, conv2;  // feed AdaIN, so no bias
  AffineHead head1, head2;
  ParamId out_w, out_b;
};

struct GeneratorParams {
  GeneratorConfig config;
  EncoderParams ref_encoder;
  EncoderParams tgt_encoder;
  std::vector<attention::TransformerModuleParams> transformer;
  std::optional<NoTransformerParams> no_transformer;
  parts::PartEncoderParams part_encoder;
  DecoderParams decoder;
};

GeneratorParams make_generator(ParamStore& store, const GeneratorConfig& cfg, Rng& rng);

struct GeneratorOutput {
  Var image;    // 3×H×W in (0,1)
  Var f_r;      // d×H/4×W/4
  Var f_t;
  Var f_rt;     // after the transformer stack
  Var texture;  // F_C, length S
};

Var encode_reference(ParamBinding& bind, const GeneratorParams& g, const Var& ref_image,
                     const Var& ref_pose, const Var& tgt_pose);
Var encode_target_pose(ParamBinding& bind, const GeneratorParams& g, const Var& tgt_pose);
Var transform(ParamBinding& bind, const GeneratorParams& g, const Var& f_r, const Var& f_t);
Var decode(ParamBinding& bind, const GeneratorParams& g, const Var& f_rt, const Var& texture);

GeneratorOutput generate(ParamBinding& bind, const GeneratorParams& g, const PersonSample& s);

struct DiscriminatorConfig {
  int scales = 2;
  int c1 = 16;
  int c2 = 32;
};

struct ResidualBlock {
  ParamId w1, b1, w2, b2;
};

struct ScaleBranch {
  ParamId conv1_w, conv1_b;
  ResidualBlock res1;
  ParamId conv2_w, conv2_b;
  ResidualBlock res2;
  ParamId logit_w, logit_b;
};

struct DiscriminatorParams {
  DiscriminatorConfig config;
  std::vector<ScaleBranch> branches;  // branch s sees the image pooled s times
};

inline constexpr int kMinDiscriminatorSize = 16;

DiscriminatorParams make_discriminator(ParamStore& store, const DiscriminatorConfig& cfg,
                                       Rng& rng);

/// One patch-logit map per scale; logits are unbounded.
std::vector<Var> discriminate(ParamBinding& bind, const DiscriminatorParams& d, const Var& image);

}  // namespace pdgan::nets
