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

#include "pdgan/tape.hpp"

// Differentiable primitives. Every function records one node on the tape of
// its first operand and throws ShapeError on incompatible operands.
namespace pdgan {

// Linear algebra on rank-2 values.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add_row_bias(const Var& x, const Var& bias);  // x: m×n, bias: n

// Elementwise.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var abs(const Var& x);
Var square(const Var& x);
Var softplus(const Var& x);  // log(1 + exp(x)), overflow-free

// Reductions to a one-element tensor.
Var sum(const Var& x);
Var mean(const Var& x);

Var softmax(const Var& x, int axis);

// x: C×(spatial...). Normalizes every channel over its spatial extent with
// the biased variance.
Var instance_norm(const Var& x, double eps);
// x: C×(spatial...), gamma/beta: C.
Var channel_affine(const Var& x, const Var& gamma, const Var& beta);
Var adain(const Var& content, const Var& gamma, const Var& beta, double eps);

Var reshape(const Var& x, Shape shape);
Var concat(const std::vector<Var>& xs, int axis);
Var slice(const Var& x, int axis, int begin, int end);
Var concat_channels(const std::vector<Var>& xs);

// x: C_in×H×W, w: C_out×C_in×k×k with k ∈ {1, 3}, zero padding (k-1)/2.
Var conv2d(const Var& x, const Var& w, const std::optional<Var>& bias, int stride);
Var upsample_nearest2x(const Var& x);
Var avg_pool2x(const Var& x);      // floor on odd sizes
Var global_avg_pool(const Var& x);  // C×H×W -> C

struct CropBox {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;
  bool operator==(const CropBox&) const = default;
};

// Crops x: C×H×W to box and resamples to out_h×out_w with bilinear
// interpolation on pixel centers.
Var crop_resize(const Var& x, const CropBox& box, int out_h, int out_w);

}  // namespace pdgan
