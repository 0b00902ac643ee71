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

#include "pdgan/attention.hpp"

#include <cmath>

#include "pdgan/errors.hpp"
#include "pdgan/ops.hpp"

namespace pdgan::attention {

TokenSequence to_tokens(const Var& feature_map) {
  if (feature_map.value().ndim() != 3) {
    throw ShapeError("to_tokens expects C×H×W, got " + shape_str(feature_map.shape()));
  }
  const int c = feature_map.dim(0), h = feature_map.dim(1), w = feature_map.dim(2);
  return TokenSequence{transpose(reshape(feature_map, {c, h * w})), h, w};
}

Var to_feature_map(const TokenSequence& tokens) {
  const int d = tokens.embed_dim();
  return reshape(transpose(tokens.values), {d, tokens.height, tokens.width});
}

AttentionResult scaled_dot_attention(const Var& q, const Var& k, const Var& v) {
  if (q.value().ndim() != 2 || k.value().ndim() != 2 || v.value().ndim() != 2 ||
      q.dim(1) != k.dim(1) || k.dim(0) != v.dim(0)) {
    throw ShapeError("attention width mismatch: Q " + shape_str(q.shape()) + ", K " +
                     shape_str(k.shape()) + ", V " + shape_str(v.shape()));
  }
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  Var weights = softmax(scale(matmul(q, transpose(k)), inv_sqrt_dk), 1);
  return AttentionResult{matmul(weights, v), weights};
}

MhaParams make_mha(ParamStore& store, const std::string& prefix, int embed_dim, int heads,
                   bool output_projection, Rng& rng) {
  if (heads < 1 || embed_dim % heads != 0) {
    throw ShapeError("head count " + std::to_string(heads) + " does not divide width " +
                     std::to_string(embed_dim));
  }
  MhaParams p;
  p.embed_dim = embed_dim;
  p.heads = heads;
  const double std = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  for (int h = 0; h < heads; ++h) {
    const std::string tag = "." + std::to_string(h);
    p.wq.push_back(add_dense_weight(store, prefix + ".wq" + tag, embed_dim, p.head_dim(), std, rng));
    p.wk.push_back(add_dense_weight(store, prefix + ".wk" + tag, embed_dim, p.head_dim(), std, rng));
    p.wv.push_back(add_dense_weight(store, prefix + ".wv" + tag, embed_dim, p.head_dim(), std, rng));
  }
  if (output_projection) {
    p.wo = add_dense_weight(store, prefix + ".wo", embed_dim, embed_dim, std, rng);
  }
  return p;
}

Var mha(ParamBinding& bind, const MhaParams& p, const Var& q, const Var& k, const Var& v) {
  for (const Var* x : {&q, &k, &v}) {
    if (x->value().ndim() != 2 || x->dim(1) != p.embed_dim) {
      throw ShapeError("mha expects L×" + std::to_string(p.embed_dim) + " tokens, got " +
                       shape_str(x->shape()));
    }
  }
  std::vector<Var> heads;
  heads.reserve(p.heads);
  for (int h = 0; h < p.heads; ++h) {
    heads.push_back(scaled_dot_attention(matmul(q, bind(p.wq[h])), matmul(k, bind(p.wk[h])),
                                         matmul(v, bind(p.wv[h])))
                        .output);
  }
  Var joined = p.heads == 1 ? heads.front() : concat(heads, 1);
  return p.wo.valid() ? matmul(joined, bind(p.wo)) : joined;
}

MlpParams make_mlp(ParamStore& store, const std::string& prefix, int d, int hidden, Rng& rng) {
  MlpParams p;
  p.w1 = add_dense_weight(store, prefix + ".w1", d, hidden, std::sqrt(2.0 / d), rng);
  p.b1 = add_filled(store, prefix + ".b1", {hidden}, 0.0);
  p.w2 = add_dense_weight(store, prefix + ".w2", hidden, d, std::sqrt(1.0 / hidden), rng);
  return p;
}

Var mlp(ParamBinding& bind, const MlpParams& p, const Var& tokens) {
  Var hidden = relu(add_row_bias(matmul(tokens, bind(p.w1)), bind(p.b1)));
  return matmul(hidden, bind(p.w2));
}

TransformerModuleParams make_transformer_module(ParamStore& store, const std::string& prefix,
                                                const TransformerConfig& cfg, Rng& rng) {
  TransformerModuleParams p;
  p.embed_dim = cfg.embed_dim;
  p.self_attention = make_mha(store, prefix + ".mhsa", cfg.embed_dim, cfg.heads,
                              cfg.output_projection, rng);
  p.cross_attention = make_mha(store, prefix + ".mhca", cfg.embed_dim, cfg.heads,
                               cfg.output_projection, rng);
  p.mlp = make_mlp(store, prefix + ".mlp", cfg.embed_dim, cfg.mlp_ratio * cfg.embed_dim, rng);
  if (cfg.use_fft) {
    p.fft_in = fourier::make_fft_block(store, prefix + ".fft_in", cfg.embed_dim, cfg.fft_bias, rng);
    p.fft_out =
        fourier::make_fft_block(store, prefix + ".fft_out", cfg.embed_dim, cfg.fft_bias, rng);
  }
  return p;
}

TokenSequence transformer_module(ParamBinding& bind, const TransformerModuleParams& p,
                                 const TokenSequence& reference, const TokenSequence& target,
                                 double eps) {
  if (reference.height != target.height || reference.width != target.width ||
      reference.values.shape() != target.values.shape()) {
    throw ShapeError("transformer_module: F_R " + shape_str(reference.values.shape()) +
                     " and F_T " + shape_str(target.values.shape()) + " differ");
  }
  if (reference.embed_dim() != p.embed_dim) {
    throw ShapeError("transformer_module built for width " + std::to_string(p.embed_dim));
  }
  const int h = reference.height, w = reference.width;
  auto as_tokens = [h, w](const Var& fmap) { return to_tokens(fmap).values; };
  auto as_map = [h, w](const Var& tokens) { return to_feature_map(TokenSequence{tokens, h, w}); };

  const Var fr = to_feature_map(reference);
  Var pre1 = add(fr, as_map(mha(bind, p.self_attention, reference.values, reference.values,
                                reference.values)));
  if (p.fft_in) pre1 = add(pre1, fourier::fft_block(bind, *p.fft_in, fr));
  const Var f1 = instance_norm(pre1, eps);

  const Var f1_tokens = as_tokens(f1);
  const Var f2 = instance_norm(
      add(f1, as_map(mha(bind, p.cross_attention, target.values, f1_tokens, f1_tokens))), eps);

  Var pre3 = add(f2, as_map(mlp(bind, p.mlp, as_tokens(f2))));
  if (p.fft_out) pre3 = add(pre3, fourier::fft_block(bind, *p.fft_out, f2));
  return to_tokens(instance_norm(pre3, eps));
}

TokenSequence transformer_stack(ParamBinding& bind,
                                std::span<const TransformerModuleParams> modules,
                                const TokenSequence& reference, const TokenSequence& target,
                                double eps) {
  if (modules.empty()) throw ShapeError("transformer_stack needs at least one module");
  TokenSequence x = reference;
  for (const TransformerModuleParams& m : modules) x = transformer_module(bind, m, x, target, eps);
  return x;
}

Tensor positional_encoding(int height, int width, int d) {
  Tensor pe({height * width, d});
  // Half the channels encode the row, half the column.
  const int half = d / 2;
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j) {
      const int t = i * width + j;
      for (int c = 0; c < d; ++c) {
        const int axis_pos = c < half ? i : j;
        const int k = (c < half ? c : c - half) / 2;
        const double freq = std::pow(10000.0, -2.0 * k / std::max(1, half));
        pe.at(t, c) = (c % 2 == 0) ? std::sin(axis_pos * freq) : std::cos(axis_pos * freq);
      }
    }
  return pe;
}

}  // namespace pdgan::attention
