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
#include <span>
#include <vector>

#include "pdgan/fourier.hpp"
#include "pdgan/params.hpp"

namespace pdgan::attention {

/// A C×H×W feature map flattened to L = H·W tokens of width C.
struct TokenSequence {
  Var values;  // L×d
  int height = 0;
  int width = 0;

  int length() const { return height * width; }
  int embed_dim() const { return values.dim(1); }
};

TokenSequence to_tokens(const Var& feature_map);
Var to_feature_map(const TokenSequence& tokens);

struct AttentionResult {
  Var output;   // L_q×d_v
  Var weights;  // L_q×L_k, rows sum to one
};

/// softmax(Q Kᵀ / sqrt(d_k)) V
AttentionResult scaled_dot_attention(const Var& q, const Var& k, const Var& v);

struct MhaParams {
  int embed_dim = 0;
  int heads = 0;
  std::vector<ParamId> wq, wk, wv;  // one embed_dim × head_dim matrix per head
  ParamId wo;                       // invalid when the output projection is off

  int head_dim() const { return embed_dim / heads; }
};

MhaParams make_mha(ParamStore& store, const std::string& prefix, int embed_dim, int heads,
                   bool output_projection, Rng& rng);

/// Per-head projected attention, heads concatenated, then the optional
/// output projection. Inputs are L×d token matrices.
Var mha(ParamBinding& bind, const MhaParams& p, const Var& q, const Var& k, const Var& v);

// d -> hidden -> d. No output bias: the IN that follows removes any
// per-channel constant, so such a bias would never receive gradient.
struct MlpParams {
  ParamId w1, b1, w2;
};

MlpParams make_mlp(ParamStore& store, const std::string& prefix, int d, int hidden, Rng& rng);
Var mlp(ParamBinding& bind, const MlpParams& p, const Var& tokens);

struct TransformerModuleParams {
  int embed_dim = 0;
  MhaParams self_attention;
  MhaParams cross_attention;
  MlpParams mlp;
  std::optional<fourier::FftBlockParams> fft_in;   // residual on F_R
  std::optional<fourier::FftBlockParams> fft_out;  // residual on F''_R
};

struct TransformerConfig {
  int embed_dim = 64;
  int heads = 2;
  int mlp_ratio = 4;
  bool output_projection = true;
  bool use_fft = true;
  bool fft_bias = true;
};

TransformerModuleParams make_transformer_module(ParamStore& store, const std::string& prefix,
                                                const TransformerConfig& cfg, Rng& rng);

/// F'_R  = IN(F_R + FFT(F_R) + MHSA(F_R, F_R, F_R))
/// F''_R = IN(F'_R + MHCA(F_T, F'_R, F'_R))
/// out   = IN(F''_R + MLP(F''_R) + FFT(F''_R))
TokenSequence transformer_module(ParamBinding& bind, const TransformerModuleParams& p,
                                 const TokenSequence& reference, const TokenSequence& target,
                                 double eps);

/// Applies the modules in order; every module cross-attends to the same F_T.
TokenSequence transformer_stack(ParamBinding& bind,
                                std::span<const TransformerModuleParams> modules,
                                const TokenSequence& reference, const TokenSequence& target,
                                double eps);

/// Fixed 2-D sinusoidal encoding, L×d. Off by default in the generator.
Tensor positional_encoding(int height, int width, int d);

}  // namespace pdgan::attention
