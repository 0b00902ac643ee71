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

#include <complex>
#include <span>
#include <vector>

#include "pdgan/params.hpp"

namespace pdgan::fourier {

using Complex = std::complex<double>;

/// Forward transform is unnormalized; the inverse carries the 1/n factor.
/// Power-of-two lengths use iterative radix-2 Cooley-Tukey, anything else a
/// direct O(n^2) DFT.
std::vector<Complex> fft_1d(std::span<const Complex> x, bool inverse);

/// Half spectrum of a real C×H×W tensor: C×H×(W/2+1) real and imaginary parts.
struct ComplexSpectrum {
  Tensor real;
  Tensor imag;
};

int half_width(int width);

ComplexSpectrum rfft2(const Tensor& x);
Tensor irfft2(const ComplexSpectrum& s, int out_width);

// Differentiable forms. The spectrum travels as one 2C×H×(W/2+1) value with
// the real parts in channels [0, C) and the imaginary parts in [C, 2C).
Var rfft2(const Var& x);
Var irfft2(const Var& stacked, int out_width);

ComplexSpectrum unstack(const Tensor& stacked);
Tensor stack(const ComplexSpectrum& s);

/// Two 1×1 convolutions over the stacked 2C spectrum channels.
struct FftBlockParams {
  int channels = 0;
  ParamId w1, b1, w2, b2;  // biases invalid when disabled
  bool has_bias() const { return b1.valid(); }
};

FftBlockParams make_fft_block(ParamStore& store, const std::string& prefix, int channels,
                              bool with_bias, Rng& rng);

struct FftBlockOptions {
  bool skip_relu = false;  // test hook: makes identity weights an exact identity
};

/// rfft2 -> conv1×1 -> ReLU -> conv1×1 -> irfft2. The caller adds the result
/// residually.
Var fft_block(ParamBinding& bind, const FftBlockParams& p, const Var& x,
              FftBlockOptions options = {});

}  // namespace pdgan::fourier
