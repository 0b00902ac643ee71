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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <numbers>

#include "pdgan/errors.hpp"
#include "pdgan/fourier.hpp"
#include "pdgan/gradcheck.hpp"
#include "pdgan/ops.hpp"
#include "test_util.hpp"

using namespace pdgan;
using namespace pdgan::fourier;

namespace {

std::vector<Complex> naive_dft(const std::vector<Complex>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<Complex> out(n);
  for (int k = 0; k < n; ++k)
    for (int t = 0; t < n; ++t)
      out[k] += x[t] * std::exp(Complex(0, -2.0 * std::numbers::pi * k * t / n));
  return out;
}

// Full H×W spectrum of one channel.
std::vector<Complex> naive_dft2(const Tensor& x, int ch) {
  const int h = x.dim(1), w = x.dim(2);
  std::vector<Complex> out(static_cast<std::size_t>(h) * w);
  for (int u = 0; u < h; ++u)
    for (int v = 0; v < w; ++v) {
      Complex acc = 0.0;
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
          acc += x.at(ch, i, j) *
                 std::exp(Complex(0, -2.0 * std::numbers::pi * (double(u * i) / h + double(v * j) / w)));
      out[u * w + v] = acc;
    }
  return out;
}

// Rebuilds the full spectrum from the half spectrum by Hermitian symmetry.
std::vector<Complex> full_from_half(const ComplexSpectrum& s, int ch, int w) {
  const int h = s.real.dim(1), wh = s.real.dim(2);
  std::vector<Complex> full(static_cast<std::size_t>(h) * w);
  for (int u = 0; u < h; ++u)
    for (int v = 0; v < w; ++v) {
      if (v < wh) {
        full[u * w + v] = Complex(s.real.at(ch, u, v), s.imag.at(ch, u, v));
      } else {
        const int uu = (h - u) % h, vv = w - v;
        full[u * w + v] = std::conj(Complex(s.real.at(ch, uu, vv), s.imag.at(ch, uu, vv)));
      }
    }
  return full;
}

}  // namespace

TEST(Fft1d, DeltaAndConstant) {
  std::vector<Complex> delta{1, 0, 0, 0};
  for (const Complex& c : fft_1d(delta, false)) EXPECT_LT(std::abs(c - Complex(1, 0)), 1e-15);
  for (int n : {4, 6, 7, 8}) {
    std::vector<Complex> x(n, Complex(2.5, 0));
    auto f = fft_1d(x, false);
    EXPECT_LT(std::abs(f[0] - Complex(2.5 * n, 0)), 1e-12);
    for (int k = 1; k < n; ++k) EXPECT_LT(std::abs(f[k]), 1e-12) << n;
  }
}

TEST(Fft1d, MatchesNaiveDftAndInverts) {
  Rng rng(1);
  for (int n : {12, 16, 5, 1}) {
    std::vector<Complex> x(n);
    for (auto& c : x) c = Complex(rng.normal(), rng.normal());
    auto f = fft_1d(x, false);
    auto o = naive_dft(x);
    for (int k = 0; k < n; ++k) EXPECT_LT(std::abs(f[k] - o[k]), 1e-10) << n;
    auto back = fft_1d(f, true);
    for (int k = 0; k < n; ++k) EXPECT_LT(std::abs(back[k] - x[k]), 1e-12);
  }
}

TEST(Rfft2, ConstantAndDelta) {
  Tensor c({1, 4, 6}, 0.75);
  ComplexSpectrum s = rfft2(c);
  EXPECT_EQ(s.real.shape(), (Shape{1, 4, 4}));
  for (int u = 0; u < 4; ++u)
    for (int v = 0; v < 4; ++v) {
      const double expect = (u == 0 && v == 0) ? 0.75 * 24 : 0.0;
      EXPECT_NEAR(s.real.at(0, u, v), expect, 1e-10);
      EXPECT_NEAR(s.imag.at(0, u, v), 0.0, 1e-10);
    }
  Tensor d({1, 4, 6});
  d.at(0, 1, 2) = 1.0;
  ComplexSpectrum ds = rfft2(d);
  for (std::size_t i = 0; i < ds.real.size(); ++i) {
    EXPECT_NEAR(std::hypot(ds.real[i], ds.imag[i]), 1.0, 1e-12);
  }
}

TEST(Rfft2, MatchesNaive2dDft) {
  Rng rng(2);
  for (Shape shape : {Shape{1, 4, 6}, Shape{2, 5, 7}, Shape{1, 8, 8}}) {
    Tensor x = rng.normal_tensor(shape, 1.0);
    ComplexSpectrum s = rfft2(x);
    const int wh = half_width(shape[2]);
    for (int ch = 0; ch < shape[0]; ++ch) {
      auto full = naive_dft2(x, ch);
      for (int u = 0; u < shape[1]; ++u)
        for (int v = 0; v < wh; ++v) {
          const Complex got(s.real.at(ch, u, v), s.imag.at(ch, u, v));
          EXPECT_LT(std::abs(got - full[u * shape[2] + v]), 1e-10);
        }
    }
  }
}

TEST(Irfft2, RoundTripDcAndWidthCheck) {
  Rng rng(3);
  for (Shape shape : {Shape{2, 12, 16}, Shape{1, 5, 7}, Shape{3, 4, 1}}) {
    Tensor x = rng.normal_tensor(shape, 1.0);
    EXPECT_LT(max_abs_diff(irfft2(rfft2(x), shape[2]), x), 1e-9);
  }
  ComplexSpectrum dc{Tensor({1, 4, 4}), Tensor({1, 4, 4})};
  dc.real.at(0, 0, 0) = 24.0;
  Tensor ones = irfft2(dc, 6);
  for (double v : ones.values()) EXPECT_NEAR(v, 1.0, 1e-12);
  EXPECT_NO_THROW(irfft2(dc, 7));
  EXPECT_THROW(irfft2(dc, 8), ShapeError);
  EXPECT_THROW(irfft2(dc, 5), ShapeError);
}

TEST(Irfft2, ParsevalOverFullSpectrum) {
  Rng rng(4);
  for (Shape shape : {Shape{2, 12, 16}, Shape{1, 5, 7}}) {
    Tensor x = rng.normal_tensor(shape, 1.0);
    ComplexSpectrum s = rfft2(x);
    for (int ch = 0; ch < shape[0]; ++ch) {
      double energy = 0.0;
      for (int i = 0; i < shape[1]; ++i)
        for (int j = 0; j < shape[2]; ++j) energy += x.at(ch, i, j) * x.at(ch, i, j);
      double spectral = 0.0;
      for (const Complex& c : full_from_half(s, ch, shape[2])) spectral += std::norm(c);
      spectral /= shape[1] * shape[2];
      EXPECT_LT(std::abs(energy - spectral) / energy, 1e-8);
    }
  }
}

TEST(Rfft2, HermitianSymmetryAndLinearity) {
  Rng rng(5);
  Tensor x = rng.normal_tensor({1, 6, 5}, 1.0), y = rng.normal_tensor({1, 6, 5}, 1.0);
  // The reconstructed full spectrum equals the directly computed one, i.e.
  // the real-input spectrum is Hermitian.
  auto rebuilt = full_from_half(rfft2(x), 0, 5);
  auto direct = naive_dft2(x, 0);
  for (std::size_t i = 0; i < direct.size(); ++i) EXPECT_LT(std::abs(rebuilt[i] - direct[i]), 1e-10);

  const double a = 1.5, b = -0.25;
  Tensor combo(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) combo[i] = a * x[i] + b * y[i];
  ComplexSpectrum sc = rfft2(combo), sx = rfft2(x), sy = rfft2(y);
  for (std::size_t i = 0; i < sc.real.size(); ++i) {
    EXPECT_NEAR(sc.real[i], a * sx.real[i] + b * sy.real[i], 1e-10);
    EXPECT_NEAR(sc.imag[i], a * sx.imag[i] + b * sy.imag[i], 1e-10);
  }
}

TEST(SpectralOps, GradientsMatchFiniteDifferences) {
  Rng rng(6);
  auto fwd = grad_check([](Tape&, const Var& x) { return test_util::weighted_sum(rfft2(x)); },
                        rng.normal_tensor({2, 4, 6}, 1.0));
  EXPECT_LT(fwd.max_rel_error, 1e-5);
  auto fwd_odd = grad_check([](Tape&, const Var& x) { return test_util::weighted_sum(rfft2(x)); },
                            rng.normal_tensor({1, 3, 5}, 1.0));
  EXPECT_LT(fwd_odd.max_rel_error, 1e-5);
  for (int w : {6, 7}) {
    auto inv = grad_check(
        [w](Tape&, const Var& s) { return test_util::weighted_sum(irfft2(s, w)); },
        rng.normal_tensor({4, 4, half_width(w)}, 1.0));
    EXPECT_LT(inv.max_rel_error, 1e-5) << w;
  }
}

namespace {

void set_identity(Tensor& w) {
  w.fill(0.0);
  const int c = w.dim(0);
  for (int i = 0; i < c; ++i) w[static_cast<std::size_t>(i) * c + i] = 1.0;
}

}  // namespace

TEST(FftBlock, IdentityPipelineReconstructsInput) {
  Rng rng(7);
  ParamStore store;
  FftBlockParams p = make_fft_block(store, "fft", 2, false, rng);
  set_identity(store.value(p.w1));
  set_identity(store.value(p.w2));
  Tensor x = rng.normal_tensor({2, 4, 4}, 1.0);
  Tape tape;
  ParamBinding bind(tape, store, false);
  Var y = fft_block(bind, p, tape.constant(x), FftBlockOptions{.skip_relu = true});
  EXPECT_LT(max_abs_diff(y.value(), x), 1e-9);
  // With the ReLU the negative spectral parts are dropped.
  Var yr = fft_block(bind, p, tape.constant(x));
  Tensor expect_spec = stack(rfft2(x));
  for (double& v : expect_spec.values()) v = std::max(v, 0.0);
  EXPECT_LT(max_abs_diff(yr.value(), irfft2(unstack(expect_spec), 4)), 1e-9);
}

TEST(FftBlock, ZeroParametersGiveZeroOutput) {
  Rng rng(8);
  ParamStore store;
  FftBlockParams p = make_fft_block(store, "fft", 3, true, rng);
  store.value(p.w1).fill(0.0);
  store.value(p.w2).fill(0.0);
  Tape tape;
  ParamBinding bind(tape, store, false);
  Var y = fft_block(bind, p, tape.constant(rng.normal_tensor({3, 4, 5}, 1.0)));
  for (double v : y.value().values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(fft_block(bind, p, tape.constant(Tensor({2, 4, 4}))), ShapeError);
}

TEST(FftBlock, GradientCheckAllParameters) {
  Rng rng(9);
  ParamStore store;
  FftBlockParams p = make_fft_block(store, "fft", 2, true, rng);
  store.value(p.b1) = rng.normal_tensor({4}, 0.3);
  store.value(p.b2) = rng.normal_tensor({4}, 0.3);
  Tensor x = rng.normal_tensor({2, 4, 4}, 1.0);
  auto f = [&](ParamBinding& b) {
    return test_util::weighted_sum(fft_block(b, p, b.tape().constant(x)));
  };
  for (ParamId id : {p.w1, p.b1, p.w2, p.b2}) {
    std::vector<std::size_t> coords(store.value(id).size());
    std::iota(coords.begin(), coords.end(), 0);
    auto r = grad_check_param(f, store, id, 1e-6, coords);
    EXPECT_LT(r.max_rel_error, 1e-5) << store.name(id);
  }
  auto rx = grad_check(
      [&](Tape& tape, const Var& xv) {
        ParamBinding b(tape, store, false);
        return test_util::weighted_sum(fft_block(b, p, xv));
      },
      x);
  EXPECT_LT(rx.max_rel_error, 1e-5);
}
