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

#include "pdgan/fourier.hpp"

#include <cmath>
#include <numbers>

#include "pdgan/errors.hpp"
#include "pdgan/ops.hpp"

namespace pdgan::fourier {
namespace {

bool is_power_of_two(std::size_t n) { return n && !(n & (n - 1)); }

void radix2_in_place(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const Complex w = std::polar(1.0, ang * static_cast<double>(k));
        const Complex u = a[i + k];
        const Complex v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

std::vector<Complex> direct_dft(std::span<const Complex> x, bool inverse) {
  const std::size_t n = x.size();
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      // Reduce k·t mod n first so the angle stays accurate.
      const double ang = sign * 2.0 * std::numbers::pi * static_cast<double>((k * t) % n) /
                         static_cast<double>(n);
      acc += x[t] * std::polar(1.0, ang);
    }
    out[k] = acc;
  }
  return out;
}

// Weight of a half-spectrum column in the real inverse transform.
double column_weight(int v, int width) {
  if (v == 0) return 1.0;
  if (width % 2 == 0 && v == width / 2) return 1.0;
  return 2.0;
}

}  // namespace

std::vector<Complex> fft_1d(std::span<const Complex> x, bool inverse) {
  if (x.empty()) throw ShapeError("fft_1d of an empty sequence");
  std::vector<Complex> out;
  if (is_power_of_two(x.size())) {
    out.assign(x.begin(), x.end());
    radix2_in_place(out, inverse);
  } else {
    out = direct_dft(x, inverse);
  }
  if (inverse) {
    const double s = 1.0 / static_cast<double>(x.size());
    for (Complex& c : out) c *= s;
  }
  return out;
}

int half_width(int width) { return width / 2 + 1; }

ComplexSpectrum rfft2(const Tensor& x) {
  if (x.ndim() != 3) throw ShapeError("rfft2 expects C×H×W, got " + shape_str(x.shape()));
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2), wh = half_width(w);
  ComplexSpectrum s{Tensor({c, h, wh}), Tensor({c, h, wh})};
  std::vector<Complex> row(w), col(h);
  std::vector<Complex> rows(static_cast<std::size_t>(h) * wh);
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) row[j] = x.at(ch, i, j);
      const auto f = fft_1d(row, false);
      for (int v = 0; v < wh; ++v) rows[static_cast<std::size_t>(i) * wh + v] = f[v];
    }
    for (int v = 0; v < wh; ++v) {
      for (int i = 0; i < h; ++i) col[i] = rows[static_cast<std::size_t>(i) * wh + v];
      const auto f = fft_1d(col, false);
      for (int u = 0; u < h; ++u) {
        s.real.at(ch, u, v) = f[u].real();
        s.imag.at(ch, u, v) = f[u].imag();
      }
    }
  }
  return s;
}

Tensor irfft2(const ComplexSpectrum& s, int out_width) {
  if (s.real.ndim() != 3 || s.real.shape() != s.imag.shape()) {
    throw ShapeError("irfft2 expects matching C×H×(W/2+1) parts");
  }
  const int c = s.real.dim(0), h = s.real.dim(1), wh = s.real.dim(2);
  if (out_width < 1 || half_width(out_width) != wh) {
    throw ShapeError("irfft2: output width " + std::to_string(out_width) +
                     " inconsistent with half-spectrum width " + std::to_string(wh));
  }
  const int w = out_width;
  Tensor x({c, h, w});
  std::vector<Complex> col(h), row(w);
  std::vector<Complex> cols(static_cast<std::size_t>(h) * wh);
  for (int ch = 0; ch < c; ++ch) {
    for (int v = 0; v < wh; ++v) {
      for (int u = 0; u < h; ++u) col[u] = Complex(s.real.at(ch, u, v), s.imag.at(ch, u, v));
      const auto f = fft_1d(col, true);
      for (int i = 0; i < h; ++i) cols[static_cast<std::size_t>(i) * wh + v] = f[i];
    }
    for (int i = 0; i < h; ++i) {
      const Complex* a = &cols[static_cast<std::size_t>(i) * wh];
      // Hermitian completion; the DC and Nyquist bins contribute their real
      // part only.
      row[0] = a[0].real();
      for (int v = 1; v < wh; ++v) {
        if (w % 2 == 0 && v == w / 2) {
          row[v] = a[v].real();
        } else {
          row[v] = a[v];
          row[w - v] = std::conj(a[v]);
        }
      }
      const auto f = fft_1d(row, true);
      for (int j = 0; j < w; ++j) x.at(ch, i, j) = f[j].real();
    }
  }
  return x;
}

ComplexSpectrum unstack(const Tensor& stacked) {
  if (stacked.ndim() != 3 || stacked.dim(0) % 2 != 0) {
    throw ShapeError("stacked spectrum needs an even channel count, got " +
                     shape_str(stacked.shape()));
  }
  const int c = stacked.dim(0) / 2, h = stacked.dim(1), wh = stacked.dim(2);
  const std::size_t n = static_cast<std::size_t>(c) * h * wh;
  ComplexSpectrum s{Tensor({c, h, wh}), Tensor({c, h, wh})};
  std::copy_n(stacked.data(), n, s.real.data());
  std::copy_n(stacked.data() + n, n, s.imag.data());
  return s;
}

Tensor stack(const ComplexSpectrum& s) {
  const int c = s.real.dim(0), h = s.real.dim(1), wh = s.real.dim(2);
  Tensor out({2 * c, h, wh});
  std::copy(s.real.values().begin(), s.real.values().end(), out.data());
  std::copy(s.imag.values().begin(), s.imag.values().end(), out.data() + s.real.size());
  return out;
}

Var rfft2(const Var& x) {
  const int h = x.value().ndim() == 3 ? x.dim(1) : 0;
  const int w = x.value().ndim() == 3 ? x.dim(2) : 0;
  Tensor out = stack(rfft2(x.value()));
  return x.tape().record(std::move(out), {x}, [x, h, w](Tape& tape, const Tensor& g, const Tensor&) {
    Tensor* gx = tape.grad_sink(x);
    if (!gx) return;
    // Adjoint of the half-spectrum map: sum over kept bins of G e^{+iθ},
    // which is H·W·irfft2(G / column_weight).
    ComplexSpectrum gs = unstack(g);
    const int c = gs.real.dim(0), wh = gs.real.dim(2);
    for (int ch = 0; ch < c; ++ch)
      for (int u = 0; u < h; ++u)
        for (int v = 0; v < wh; ++v) {
          const double cw = column_weight(v, w);
          gs.real.at(ch, u, v) /= cw;
          gs.imag.at(ch, u, v) /= cw;
        }
    Tensor back = irfft2(gs, w);
    const double hw = static_cast<double>(h) * w;
    for (std::size_t i = 0; i < back.size(); ++i) (*gx)[i] += hw * back[i];
  });
}

Var irfft2(const Var& stacked, int out_width) {
  Tensor out = irfft2(unstack(stacked.value()), out_width);
  const int h = out.dim(1);
  return stacked.tape().record(std::move(out), {stacked},
                               [stacked, h, out_width](Tape& tape, const Tensor& g, const Tensor&) {
    Tensor* gs = tape.grad_sink(stacked);
    if (!gs) return;
    // Adjoint: column_weight / (H·W) · rfft2(g).
    ComplexSpectrum f = rfft2(g);
    const int c = f.real.dim(0), wh = f.real.dim(2);
    const double hw = static_cast<double>(h) * out_width;
    const std::size_t n = static_cast<std::size_t>(c) * h * wh;
    for (int ch = 0; ch < c; ++ch)
      for (int u = 0; u < h; ++u)
        for (int v = 0; v < wh; ++v) {
          const double k = column_weight(v, out_width) / hw;
          const std::size_t i = (static_cast<std::size_t>(ch) * h + u) * wh + v;
          (*gs)[i] += k * f.real[i];
          (*gs)[n + i] += k * f.imag[i];
        }
  });
}

FftBlockParams make_fft_block(ParamStore& store, const std::string& prefix, int channels,
                              bool with_bias, Rng& rng) {
  FftBlockParams p;
  p.channels = channels;
  const int c2 = 2 * channels;
  p.w1 = add_conv_weight(store, prefix + ".w1", c2, c2, 1, rng);
  if (with_bias) p.b1 = add_filled(store, prefix + ".b1", {c2}, 0.0);
  p.w2 = add_conv_weight(store, prefix + ".w2", c2, c2, 1, rng);
  if (with_bias) p.b2 = add_filled(store, prefix + ".b2", {c2}, 0.0);
  return p;
}

Var fft_block(ParamBinding& bind, const FftBlockParams& p, const Var& x, FftBlockOptions options) {
  if (x.value().ndim() != 3 || x.dim(0) != p.channels) {
    throw ShapeError("fft_block built for " + std::to_string(p.channels) +
                     " channels, got input " + shape_str(x.shape()));
  }
  auto bias = [&](ParamId id) -> std::optional<Var> {
    if (!id.valid()) return std::nullopt;
    return bind(id);
  };
  Var spec = rfft2(x);
  Var hidden = conv2d(spec, bind(p.w1), bias(p.b1), 1);
  if (!options.skip_relu) hidden = relu(hidden);
  Var mixed = conv2d(hidden, bind(p.w2), bias(p.b2), 1);
  return irfft2(mixed, x.dim(2));
}

}  // namespace pdgan::fourier
