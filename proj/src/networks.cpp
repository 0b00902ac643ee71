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

#include "pdgan/networks.hpp"

#include <cmath>

#include "pdgan/errors.hpp"
#include "pdgan/ops.hpp"

namespace pdgan::nets {
namespace {

// Prefixes shape errors with the sub-module that raised them.
template <typename F>
auto in_module(const char* module, F&& f) {
  try {
    return f();
  } catch (const ShapeError& e) {
    throw ShapeError(std::string(module) + ": " + e.what());
  }
}

EncoderParams make_encoder(ParamStore& store, const std::string& prefix, int c_in, int hidden,
                           int d, Rng& rng) {
  return EncoderParams{add_conv_weight(store, prefix + ".conv1", hidden, c_in, 3, rng),
                       add_conv_weight(store, prefix + ".conv2", d, hidden, 3, rng)};
}

Var run_encoder(ParamBinding& bind, const EncoderParams& p, const Var& x, double eps) {
  Var h = relu(instance_norm(conv2d(x, bind(p.conv1), std::nullopt, 2), eps));
  return relu(instance_norm(conv2d(h, bind(p.conv2), std::nullopt, 2), eps));
}

AffineHead make_head(ParamStore& store, const std::string& prefix, int s, int c, Rng& rng) {
  const double std = 1.0 / std::sqrt(static_cast<double>(s));
  AffineHead h;
  h.w_gamma = add_dense_weight(store, prefix + ".w_gamma", s, c, std, rng);
  h.b_gamma = add_filled(store, prefix + ".b_gamma", {c}, 1.0);
  h.w_beta = add_dense_weight(store, prefix + ".w_beta", s, c, std, rng);
  h.b_beta = add_filled(store, prefix + ".b_beta", {c}, 0.0);
  return h;
}

// F_C (length S) times an S×c weight plus bias, as a length-c vector.
Var linear(ParamBinding& bind, ParamId w, ParamId b, const Var& code) {
  Var row = reshape(code, {1, static_cast<int>(code.size())});
  Var out = add_row_bias(matmul(row, bind(w)), bind(b));
  return reshape(out, {static_cast<int>(out.size())});
}

Var residual(ParamBinding& bind, ParamId w, const Var& x, double eps) {
  return add(x, relu(instance_norm(conv2d(x, bind(w), std::nullopt, 1), eps)));
}

ResidualBlock make_res_block(ParamStore& store, const std::string& prefix, int c, Rng& rng) {
  ResidualBlock r;
  r.w1 = add_conv_weight(store, prefix + ".w1", c, c, 3, rng);
  r.b1 = add_filled(store, prefix + ".b1", {c}, 0.0);
  r.w2 = add_conv_weight(store, prefix + ".w2", c, c, 3, rng);
  r.b2 = add_filled(store, prefix + ".b2", {c}, 0.0);
  return r;
}

Var run_res_block(ParamBinding& bind, const ResidualBlock& r, const Var& x) {
  Var h = relu(conv2d(x, bind(r.w1), bind(r.b1), 1));
  return relu(add(x, conv2d(h, bind(r.w2), bind(r.b2), 1)));
}

}  // namespace

GeneratorParams make_generator(ParamStore& store, const GeneratorConfig& cfg, Rng& rng) {
  if (cfg.keypoints < 1 || cfg.d < 1 || cfg.texture_dim < 1) {
    throw UsageError("generator widths must be positive");
  }
  if (cfg.use_transformer && cfg.n_transformer < 1) {
    throw UsageError("model.n_transformer must be at least 1");
  }
  GeneratorParams g;
  g.config = cfg;
  g.ref_encoder = make_encoder(store, "gen.ref_encoder", 3 + 2 * cfg.keypoints,
                               cfg.encoder_hidden, cfg.d, rng);
  g.tgt_encoder =
      make_encoder(store, "gen.tgt_encoder", cfg.keypoints, cfg.encoder_hidden, cfg.d, rng);
  if (cfg.use_transformer) {
    attention::TransformerConfig tc;
    tc.embed_dim = cfg.d;
    tc.heads = cfg.heads;
    tc.output_projection = cfg.output_projection;
    tc.use_fft = cfg.use_fft;
    tc.fft_bias = cfg.fft_bias;
    for (int i = 0; i < cfg.n_transformer; ++i) {
      g.transformer.push_back(
          attention::make_transformer_module(store, "gen.transformer." + std::to_string(i), tc, rng));
    }
  } else {
    NoTransformerParams nt;
    nt.mix_w = add_conv_weight(store, "gen.no_transformer.mix_w", cfg.d, 2 * cfg.d, 1, rng);
    nt.mix_b = add_filled(store, "gen.no_transformer.mix_b", {cfg.d}, 0.0);
    nt.res1 = add_conv_weight(store, "gen.no_transformer.res1", cfg.d, cfg.d, 3, rng);
    nt.res2 = add_conv_weight(store, "gen.no_transformer.res2", cfg.d, cfg.d, 3, rng);
    g.no_transformer = nt;
  }
  parts::PartEncoderConfig pc;
  pc.active_parts = cfg.active_parts;
  pc.texture_dim = cfg.texture_dim;
  pc.hidden = cfg.part_hidden;
  pc.feature = cfg.part_feature;
  g.part_encoder = parts::make_part_encoder(store, "gen.parts", pc, rng);

  DecoderParams& dec = g.decoder;
  dec.conv1 = add_conv_weight(store, "gen.decoder.conv1", cfg.decoder_hidden, cfg.d, 3, rng);
  dec.head1 = make_head(store, "gen.decoder.adain1", cfg.texture_dim, cfg.decoder_hidden, rng);
  dec.conv2 =
      add_conv_weight(store, "gen.decoder.conv2", cfg.decoder_out, cfg.decoder_hidden, 3, rng);
  dec.head2 = make_head(store, "gen.decoder.adain2", cfg.texture_dim, cfg.decoder_out, rng);
  dec.out_w = add_conv_weight(store, "gen.decoder.out_w", 3, cfg.decoder_out, 3, rng);
  dec.out_b = add_filled(store, "gen.decoder.out_b", {3}, 0.0);
  return g;
}

Var encode_reference(ParamBinding& bind, const GeneratorParams& g, const Var& ref_image,
                     const Var& ref_pose, const Var& tgt_pose) {
  return in_module("reference encoder", [&] {
    const int k = g.config.keypoints;
    if (ref_pose.value().ndim() != 3 || tgt_pose.value().ndim() != 3 || ref_pose.dim(0) != k ||
        tgt_pose.dim(0) != k) {
      throw ShapeError("pose heatmaps must have " + std::to_string(k) + " channels");
    }
    Var x = concat_channels({ref_image, ref_pose, tgt_pose});
    if (x.dim(1) % 4 != 0 || x.dim(2) % 4 != 0) {
      throw ShapeError("image size " + shape_str(x.shape()) + " is not divisible by 4");
    }
    return run_encoder(bind, g.ref_encoder, x, g.config.eps);
  });
}

Var encode_target_pose(ParamBinding& bind, const GeneratorParams& g, const Var& tgt_pose) {
  return in_module("target-pose encoder", [&] {
    if (tgt_pose.value().ndim() != 3 || tgt_pose.dim(0) != g.config.keypoints) {
      throw ShapeError("pose heatmaps must have " + std::to_string(g.config.keypoints) +
                       " channels, got " + shape_str(tgt_pose.shape()));
    }
    if (tgt_pose.dim(1) % 4 != 0 || tgt_pose.dim(2) % 4 != 0) {
      throw ShapeError("pose size " + shape_str(tgt_pose.shape()) + " is not divisible by 4");
    }
    return run_encoder(bind, g.tgt_encoder, tgt_pose, g.config.eps);
  });
}

Var transform(ParamBinding& bind, const GeneratorParams& g, const Var& f_r, const Var& f_t) {
  return in_module("transformer", [&] {
    const double eps = g.config.eps;
    if (g.no_transformer) {
      const NoTransformerParams& nt = *g.no_transformer;
      Var x = conv2d(concat_channels({f_r, f_t}), bind(nt.mix_w), bind(nt.mix_b), 1);
      return residual(bind, nt.res2, residual(bind, nt.res1, x, eps), eps);
    }
    attention::TokenSequence r = attention::to_tokens(f_r);
    attention::TokenSequence t = attention::to_tokens(f_t);
    if (g.config.positional_encoding) {
      Var pe = bind.tape().constant(attention::positional_encoding(r.height, r.width, g.config.d));
      r.values = add(r.values, pe);
      t.values = add(t.values, pe);
    }
    return attention::to_feature_map(attention::transformer_stack(bind, g.transformer, r, t, eps));
  });
}

Var decode(ParamBinding& bind, const GeneratorParams& g, const Var& f_rt, const Var& texture) {
  return in_module("decoder", [&] {
    const DecoderParams& dec = g.decoder;
    const GeneratorConfig& cfg = g.config;
    auto modulated = [&](const Var& x, ParamId conv, const AffineHead& head) {
      Var y = conv2d(upsample_nearest2x(x), bind(conv), std::nullopt, 1);
      Var gamma = linear(bind, head.w_gamma, head.b_gamma, texture);
      Var beta = linear(bind, head.w_beta, head.b_beta, texture);
      return relu(adain(y, gamma, beta, cfg.eps));
    };
    Var h = modulated(f_rt, dec.conv1, dec.head1);
    h = modulated(h, dec.conv2, dec.head2);
    return sigmoid(conv2d(h, bind(dec.out_w), bind(dec.out_b), 1));
  });
}

GeneratorOutput generate(ParamBinding& bind, const GeneratorParams& g, const PersonSample& s) {
  Tape& tape = bind.tape();
  Var ref_img = tape.constant(s.ref_image);
  Var ref_pose = tape.constant(s.ref_pose);
  Var tgt_pose = tape.constant(s.tgt_pose);
  GeneratorOutput out;
  out.f_r = encode_reference(bind, g, ref_img, ref_pose, tgt_pose);
  out.f_t = encode_target_pose(bind, g, tgt_pose);
  out.f_rt = transform(bind, g, out.f_r, out.f_t);
  out.texture = in_module("part encoder", [&] {
    return parts::texture_code(bind, g.part_encoder, s.ref_image, s.ref_masks);
  });
  out.image = decode(bind, g, out.f_rt, out.texture);
  return out;
}

DiscriminatorParams make_discriminator(ParamStore& store, const DiscriminatorConfig& cfg,
                                       Rng& rng) {
  if (cfg.scales < 1) throw UsageError("discriminator needs at least one scale");
  DiscriminatorParams d;
  d.config = cfg;
  for (int s = 0; s < cfg.scales; ++s) {
    const std::string p = "disc.scale" + std::to_string(s);
    ScaleBranch b;
    b.conv1_w = add_conv_weight(store, p + ".conv1_w", cfg.c1, 3, 3, rng);
    b.conv1_b = add_filled(store, p + ".conv1_b", {cfg.c1}, 0.0);
    b.res1 = make_res_block(store, p + ".res1", cfg.c1, rng);
    b.conv2_w = add_conv_weight(store, p + ".conv2_w", cfg.c2, cfg.c1, 3, rng);
    b.conv2_b = add_filled(store, p + ".conv2_b", {cfg.c2}, 0.0);
    b.res2 = make_res_block(store, p + ".res2", cfg.c2, rng);
    b.logit_w = add_conv_weight(store, p + ".logit_w", 1, cfg.c2, 1, rng);
    b.logit_b = add_filled(store, p + ".logit_b", {1}, 0.0);
    d.branches.push_back(b);
  }
  return d;
}

std::vector<Var> discriminate(ParamBinding& bind, const DiscriminatorParams& d, const Var& image) {
  if (image.value().ndim() != 3 || image.dim(0) != 3) {
    throw ShapeError("discriminator expects 3×H×W, got " + shape_str(image.shape()));
  }
  if (image.dim(1) < kMinDiscriminatorSize || image.dim(2) < kMinDiscriminatorSize) {
    throw ShapeError("discriminator input " + shape_str(image.shape()) + " is below 16×16");
  }
  std::vector<Var> logits;
  Var x = image;
  for (std::size_t s = 0; s < d.branches.size(); ++s) {
    if (s > 0) x = avg_pool2x(x);
    const ScaleBranch& b = d.branches[s];
    Var h = relu(conv2d(x, bind(b.conv1_w), bind(b.conv1_b), 2));
    h = run_res_block(bind, b.res1, h);
    h = relu(conv2d(h, bind(b.conv2_w), bind(b.conv2_b), 2));
    h = run_res_block(bind, b.res2, h);
    logits.push_back(conv2d(h, bind(b.logit_w), bind(b.logit_b), 1));
  }
  return logits;
}

}  // namespace pdgan::nets
