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

#include "pdgan/adam.hpp"
#include "pdgan/errors.hpp"
#include "pdgan/gradcheck.hpp"
#include "pdgan/ops.hpp"
#include "pdgan/params.hpp"
#include "test_util.hpp"

using namespace pdgan;
using pdgan::test_util::weighted_sum;

namespace {

Tensor matmul_oracle(const Tensor& a, const Tensor& b) {
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += a.at(i, p) * b.at(p, j);
      c.at(i, j) = s;
    }
  return c;
}

Tensor conv_oracle(const Tensor& x, const Tensor& w, int stride) {
  const int ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int co = w.dim(0), k = w.dim(2), pad = (k - 1) / 2;
  const int ho = (h + 2 * pad - k) / stride + 1, wo = (wd + 2 * pad - k) / stride + 1;
  Tensor out({co, ho, wo});
  for (int o = 0; o < co; ++o)
    for (int i = 0; i < ho; ++i)
      for (int j = 0; j < wo; ++j) {
        double s = 0.0;
        for (int c = 0; c < ci; ++c)
          for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b) {
              const int ii = i * stride + a - pad, jj = j * stride + b - pad;
              if (ii >= 0 && ii < h && jj >= 0 && jj < wd) {
                s += x.at(c, ii, jj) * w[((static_cast<std::size_t>(o) * ci + c) * k + a) * k + b];
              }
            }
        out.at(o, i, j) = s;
      }
  return out;
}

}  // namespace

TEST(Matmul, IdentityAndSelector) {
  Tape tape;
  Var eye = tape.constant(Tensor::from_rows({{1, 0}, {0, 1}}));
  Var m = tape.constant(Tensor::from_rows({{1, 2}, {3, 4}}));
  EXPECT_EQ(matmul(eye, m).value(), m.value());
  Var row = tape.constant(Tensor::from_rows({{1, 0}}));
  Var col = tape.constant(Tensor::from_rows({{5}, {7}}));
  EXPECT_EQ(matmul(row, col).value(), Tensor::from_rows({{5}}));
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(3);
  Tape tape;
  Tensor a = rng.normal_tensor({3, 4}, 1.0), b = rng.normal_tensor({4, 2}, 1.0);
  Var c = matmul(tape.constant(a), tape.constant(b));
  EXPECT_LT(max_abs_diff(c.value(), matmul_oracle(a, b)), 1e-12);
}

TEST(Matmul, ShapeMismatchReportsBothShapes) {
  Tape tape;
  Var a = tape.constant(Tensor({2, 3})), b = tape.constant(Tensor({2, 3}));
  try {
    matmul(a, b);
    FAIL();
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3] · [2x3]"), std::string::npos);
  }
}

TEST(Conv2d, IdentityPointwiseAndZeroWeights) {
  Rng rng(4);
  Tape tape;
  Tensor x = rng.normal_tensor({3, 5, 4}, 1.0);
  Tensor eye({3, 3, 1, 1});
  for (int c = 0; c < 3; ++c) eye[c * 3 + c] = 1.0;
  Var y = conv2d(tape.constant(x), tape.constant(eye), std::nullopt, 1);
  EXPECT_EQ(y.value(), x);
  Var z = conv2d(tape.constant(x), tape.constant(Tensor({2, 3, 3, 3})), std::nullopt, 1);
  for (double v : z.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(Conv2d, MatchesDirectLoops) {
  Rng rng(5);
  Tensor x = rng.normal_tensor({2, 5, 5}, 1.0);
  Tensor w = rng.normal_tensor({3, 2, 3, 3}, 1.0);
  for (int stride : {1, 2}) {
    Tape tape;
    Var y = conv2d(tape.constant(x), tape.constant(w), std::nullopt, stride);
    EXPECT_LT(max_abs_diff(y.value(), conv_oracle(x, w, stride)), 1e-12) << stride;
  }
  Tape tape;
  Var y = conv2d(tape.constant(x), tape.constant(w), std::nullopt, 2);
  EXPECT_EQ(y.shape(), (Shape{3, 3, 3}));
}

TEST(Conv2d, RejectsUnsupportedKernel) {
  Tape tape;
  Var x = tape.constant(Tensor({1, 6, 6}));
  EXPECT_THROW(conv2d(x, tape.constant(Tensor({1, 1, 5, 5})), std::nullopt, 1), ShapeError);
  EXPECT_THROW(conv2d(x, tape.constant(Tensor({1, 2, 3, 3})), std::nullopt, 1), ShapeError);
}

TEST(Softmax, UniformStableAndScalarOracle) {
  Tape tape;
  Var u = softmax(tape.constant(Tensor({3}, 0.0)), 0);
  for (double v : u.value().values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  Var big = softmax(tape.constant(Tensor({2}, {1000.0, 0.0})), 0);
  EXPECT_EQ(big.value()[0], 1.0);
  EXPECT_EQ(big.value()[1], 0.0);
  EXPECT_TRUE(big.value().all_finite());
  Var p = softmax(tape.constant(Tensor({2}, {1.0, 2.0})), 0);
  const double z = std::exp(1.0) + std::exp(2.0);
  EXPECT_NEAR(p.value()[0], std::exp(1.0) / z, 1e-15);
  EXPECT_NEAR(p.value()[1], std::exp(2.0) / z, 1e-15);
  EXPECT_NEAR(p.value()[0], 0.26894142, 1e-8);
}

TEST(Softmax, SlicesSumToOneAndShiftInvariant) {
  Rng rng(6);
  Tensor x = rng.normal_tensor({4, 5, 3}, 3.0);
  for (int axis = 0; axis < 3; ++axis) {
    Tape tape;
    Var y = softmax(tape.constant(x), axis);
    Tensor shifted = x;
    for (double& v : shifted.values()) v += 17.25;
    Var ys = softmax(tape.constant(shifted), axis);
    EXPECT_LT(max_abs_diff(y.value(), ys.value()), 1e-12);
    const Shape& s = x.shape();
    const int inner = axis == 2 ? 1 : (axis == 1 ? s[2] : s[1] * s[2]);
    const int extent = s[axis];
    const int outer = static_cast<int>(x.size()) / (inner * extent);
    for (int o = 0; o < outer; ++o)
      for (int i = 0; i < inner; ++i) {
        double t = 0.0;
        for (int a = 0; a < extent; ++a) t += y.value()[(o * extent + a) * inner + i];
        EXPECT_NEAR(t, 1.0, 1e-12);
      }
  }
}

TEST(InstanceNorm, FixedCases) {
  Tape tape;
  Var y = instance_norm(tape.constant(Tensor({1, 1, 2}, {1.0, 3.0})), 1e-5);
  EXPECT_NEAR(y.value()[0], -1.0, 1e-5);
  EXPECT_NEAR(y.value()[1], 1.0, 1e-5);
  Var z = instance_norm(tape.constant(Tensor({2, 2, 2}, 4.0)), 1e-5);
  for (double v : z.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(InstanceNorm, MomentsAndIdempotence) {
  Rng rng(7);
  Tape tape;
  Var y = instance_norm(tape.constant(rng.normal_tensor({2, 4, 4}, 2.5)), 1e-5);
  for (int c = 0; c < 2; ++c) {
    double mu = 0.0, var = 0.0;
    for (int i = 0; i < 16; ++i) mu += y.value()[c * 16 + i];
    mu /= 16;
    for (int i = 0; i < 16; ++i) var += std::pow(y.value()[c * 16 + i] - mu, 2);
    var /= 16;
    EXPECT_LT(std::abs(mu), 1e-12);
    EXPECT_LT(std::abs(var - 1.0), 1e-4);
  }
  // A second pass rescales by 1/sqrt(var(y) + eps) with var(y) ~ 1, so the
  // deviation is bounded by max|y| * eps / 2 and vanishes with eps.
  double ymax = 0.0;
  for (double v : y.value().values()) ymax = std::max(ymax, std::abs(v));
  Var yy = instance_norm(y, 1e-5);
  EXPECT_LT(max_abs_diff(yy.value(), y.value()), ymax * 1e-5);
  Var small = instance_norm(tape.constant(rng.normal_tensor({2, 4, 4}, 2.5)), 1e-7);
  EXPECT_LT(max_abs_diff(instance_norm(small, 1e-7).value(), small.value()), 1e-6);
}

TEST(Adain, DegenerateAndMomentOracle) {
  Rng rng(8);
  Tape tape;
  Var x = tape.constant(rng.normal_tensor({3, 4, 5}, 1.7));
  Var ones = tape.constant(Tensor({3}, 1.0)), zeros = tape.constant(Tensor({3}));
  EXPECT_EQ(adain(x, ones, zeros, 1e-5).value(), instance_norm(x, 1e-5).value());
  Var beta = tape.constant(Tensor({3}, {0.5, -1.0, 2.0}));
  Var flat = adain(x, zeros, beta, 1e-5);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 20; ++i) EXPECT_EQ(flat.value()[c * 20 + i], beta.value()[c]);

  Var gamma = tape.constant(Tensor({3}, {2.0, -0.5, 1.25}));
  Var y = adain(x, gamma, beta, 1e-5);
  for (int c = 0; c < 3; ++c) {
    double mu = 0.0, var = 0.0;
    for (int i = 0; i < 20; ++i) mu += y.value()[c * 20 + i];
    mu /= 20;
    for (int i = 0; i < 20; ++i) var += std::pow(y.value()[c * 20 + i] - mu, 2);
    var /= 20;
    EXPECT_NEAR(mu, beta.value()[c], 1e-10);
    EXPECT_NEAR(std::sqrt(var), std::abs(gamma.value()[c]), 1e-4);
  }
  EXPECT_THROW(adain(x, tape.constant(Tensor({2}, 1.0)), tape.constant(Tensor({2})), 1e-5),
               ShapeError);
}

TEST(Elementwise, BasicValues) {
  Tape tape;
  Var r = relu(tape.constant(Tensor({3}, {-1.0, 0.0, 2.0})));
  EXPECT_EQ(r.value(), Tensor({3}, {0.0, 0.0, 2.0}));
  EXPECT_EQ(sigmoid(tape.constant(Tensor::scalar(0.0))).value()[0], 0.5);
  Var a = tape.leaf(Tensor({2}, {1.0, 2.0}), true), b = tape.leaf(Tensor({2}, {3.0, 4.0}), true);
  backward(tape, sum(add(a, b)));
  EXPECT_EQ(*tape.grad(a), Tensor({2}, 1.0));
  EXPECT_EQ(*tape.grad(b), Tensor({2}, 1.0));
  EXPECT_THROW(add(a, tape.constant(Tensor({3}))), ShapeError);
  EXPECT_THROW(mul(a, tape.constant(Tensor({3}))), ShapeError);
}

TEST(Concat, ChannelsPreservedAndRoundTrip) {
  Rng rng(9);
  Tape tape;
  Var a = tape.constant(rng.normal_tensor({1, 2, 2}, 1.0));
  Var b = tape.constant(rng.normal_tensor({1, 2, 2}, 1.0));
  EXPECT_EQ(concat_channels({a}).value(), a.value());
  Var ab = concat_channels({a, b});
  EXPECT_EQ(ab.shape(), (Shape{2, 2, 2}));
  EXPECT_EQ(slice(ab, 0, 0, 1).value(), a.value());
  EXPECT_EQ(slice(ab, 0, 1, 2).value(), b.value());
  EXPECT_THROW(concat_channels({a, tape.constant(Tensor({1, 2, 3}))}), ShapeError);
}

TEST(Backward, SimpleAdjoints) {
  Rng rng(10);
  Tape tape;
  Tensor xv = rng.normal_tensor({3, 2}, 1.0);
  Var x = tape.leaf(xv, true);
  backward(tape, sum(x));
  EXPECT_EQ(*tape.grad(x), Tensor({3, 2}, 1.0));
  tape.zero_grad();
  backward(tape, sum(mul(x, x)));
  Tensor two_x = xv;
  two_x *= 2.0;
  EXPECT_LT(max_abs_diff(*tape.grad(x), two_x), 1e-15);
  EXPECT_THROW(backward(tape, x), ShapeError);
}

TEST(Backward, AccumulatesAtFanOutAndVisitsEachNodeOnce) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, {1.0, -2.0}), true);
  Var y = scale(x, 3.0);      // node
  Var z = add(y, y);          // fan-out of y
  Var loss = sum(mul(z, x));  // x used twice
  BackwardStats stats = backward(tape, loss);
  // loss = 6 x^2 -> 12 x
  EXPECT_EQ(*tape.grad(x), Tensor({2}, {12.0, -24.0}));
  EXPECT_EQ(stats.nodes_visited, 4u);
  tape.zero_grad();
  EXPECT_EQ(tape.grad(x), nullptr);
  backward(tape, loss);
  EXPECT_EQ(*tape.grad(x), Tensor({2}, {12.0, -24.0}));
}

TEST(Backward, TopologicalOrderOfRecordedNodes) {
  Tape tape;
  Var x = tape.leaf(Tensor({2}, 1.0), true);
  Var y = relu(softplus(scale(x, 2.0)));
  sum(mul(y, x));
  for (std::size_t k = 0; k < tape.size(); ++k)
    for (int in : tape.inputs(static_cast<int>(k))) EXPECT_LT(in, static_cast<int>(k));
}

TEST(Adam, ZeroGradientLeavesParameter) {
  ParamStore store;
  ParamId p = store.add("p", Tensor({2}, {1.0, -1.0}));
  AdamState state(store, AdamConfig{0.1, 0.9, 0.999, 1e-8});
  std::vector<Tensor> g{Tensor({2})};
  adam_step(store, g, state);
  EXPECT_EQ(store.value(p), Tensor({2}, {1.0, -1.0}));
}

TEST(Adam, HandTraceFirstStep) {
  ParamStore store;
  ParamId p = store.add("p", Tensor::scalar(1.0));
  AdamState state(store, AdamConfig{0.1, 0.9, 0.999, 1e-8});
  std::vector<Tensor> g{Tensor::scalar(0.5)};
  adam_step(store, g, state);
  EXPECT_EQ(state.step, 1);
  EXPECT_NEAR(state.first_moment[0][0], 0.05, 1e-15);
  EXPECT_NEAR(state.second_moment[0][0], 2.5e-4, 1e-15);
  // m_hat = 0.5, v_hat = 0.25 -> p' = 1 - 0.1 * 0.5 / (0.5 + 1e-8)
  EXPECT_NEAR(store.value(p)[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(store.value(p)[0], 0.9, 1e-7);
}

TEST(Adam, ConstantGradientMovesAgainstSign) {
  ParamStore store;
  ParamId p = store.add("p", Tensor({2}, {0.0, 0.0}));
  AdamState state(store, AdamConfig{0.01, 0.9, 0.999, 1e-8});
  std::vector<Tensor> g{Tensor({2}, {1.0, -3.0})};
  adam_step(store, g, state);
  const Tensor after_one = store.value(p);
  adam_step(store, g, state);
  EXPECT_EQ(state.step, 2);
  EXPECT_LT(store.value(p)[0], after_one[0]);
  EXPECT_LT(after_one[0], 0.0);
  EXPECT_GT(store.value(p)[1], after_one[1]);
  EXPECT_GT(after_one[1], 0.0);
  std::vector<Tensor> bad{Tensor({3})};
  EXPECT_THROW(adam_step(store, bad, state), ShapeError);
}

TEST(GradCheck, SumIsExact) {
  Rng rng(11);
  // Sum is linear, so any step is exact up to rounding; a dyadic step keeps
  // the rounding far below the tolerance.
  auto r = grad_check([](Tape&, const Var& x) { return sum(x); }, rng.normal_tensor({3, 3}, 1.0),
                      0.25);
  EXPECT_LT(r.max_rel_error, 1e-12);
  EXPECT_EQ(r.coords_checked, 9u);
}

TEST(GradCheck, SoftmaxCrossEntropy) {
  Rng rng(12);
  Tensor onehot({2, 4});
  onehot.at(0, 1) = 1.0;
  onehot.at(1, 3) = 1.0;
  auto f = [&](Tape& tape, const Var& x) {
    Var p = softmax(x, 1);
    // -sum(onehot * log p) with log p = x - logsumexp, expressed through ops
    Var t = tape.constant(onehot);
    Var picked = sum(mul(p, t));
    return scale(softplus(scale(picked, -4.0)), 1.0);
  };
  auto r = grad_check(f, rng.normal_tensor({2, 4}, 1.0), 1e-6);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

// Every differentiable primitive, one random instance each.
TEST(GradCheck, EveryPrimitive) {
  Rng rng(13);
  struct Case {
    const char* name;
    Shape shape;
    ScalarFunction f;
  };
  Tensor other = rng.normal_tensor({3, 4}, 1.0);
  Tensor w3 = rng.normal_tensor({2, 3, 3, 3}, 0.5);
  Tensor w1 = rng.normal_tensor({2, 3, 1, 1}, 0.5);
  Tensor bias = rng.normal_tensor({2}, 0.5);
  Tensor content = rng.normal_tensor({2, 3, 3}, 1.0);
  Tensor img = rng.normal_tensor({3, 5, 6}, 1.0);
  Tensor img4 = rng.normal_tensor({3, 4, 4}, 1.0);
  std::vector<Case> cases = {
      {"matmul_lhs", {2, 3}, [&](Tape& t, const Var& x) { return weighted_sum(matmul(x, t.constant(other))); }},
      {"matmul_rhs", {4, 2}, [&](Tape& t, const Var& x) { return weighted_sum(matmul(t.constant(other), x)); }},
      {"transpose", {3, 2}, [](Tape&, const Var& x) { return weighted_sum(transpose(x)); }},
      {"add_row_bias", {4}, [&](Tape& t, const Var& x) { return weighted_sum(add_row_bias(t.constant(other), x)); }},
      {"sub", {3, 4}, [&](Tape& t, const Var& x) { return weighted_sum(sub(t.constant(other), x)); }},
      {"mul", {3, 4}, [&](Tape& t, const Var& x) { return weighted_sum(mul(x, t.constant(other))); }},
      {"sigmoid", {3, 4}, [](Tape&, const Var& x) { return weighted_sum(sigmoid(x)); }},
      {"relu", {3, 4}, [](Tape&, const Var& x) { return weighted_sum(relu(x)); }},
      {"abs", {3, 4}, [](Tape&, const Var& x) { return weighted_sum(abs(x)); }},
      {"square", {3, 4}, [](Tape&, const Var& x) { return weighted_sum(square(x)); }},
      {"softplus", {3, 4}, [](Tape&, const Var& x) { return weighted_sum(softplus(scale(x, 3.0))); }},
      {"mean", {3, 4}, [](Tape&, const Var& x) { return mean(square(x)); }},
      {"softmax_rows", {3, 4}, [](Tape&, const Var& x) { return weighted_sum(softmax(x, 1)); }},
      {"softmax_cols", {3, 4}, [](Tape&, const Var& x) { return weighted_sum(softmax(x, 0)); }},
      {"instance_norm", {2, 3, 4}, [](Tape&, const Var& x) { return weighted_sum(instance_norm(x, 1e-5)); }},
      {"channel_affine_gamma", {2}, [&](Tape& t, const Var& x) {
         return weighted_sum(channel_affine(t.constant(content), x, t.constant(bias)));
       }},
      {"adain_content", {2, 3, 3}, [&](Tape& t, const Var& x) {
         return weighted_sum(adain(x, t.constant(bias), t.constant(bias), 1e-5));
       }},
      {"concat_slice", {2, 3, 3}, [](Tape&, const Var& x) {
         return weighted_sum(slice(concat({x, scale(x, 2.0)}, 0), 0, 1, 3));
       }},
      {"conv3x3_input", {3, 5, 4}, [&](Tape& t, const Var& x) {
         return weighted_sum(conv2d(x, t.constant(w3), t.constant(bias), 1));
       }},
      {"conv3x3_s2_weight", {2, 3, 3, 3}, [&](Tape& t, const Var& w) {
         return weighted_sum(conv2d(t.constant(img), w, std::nullopt, 2));
       }},
      {"conv1x1_input", {3, 4, 4}, [&](Tape& t, const Var& x) {
         return weighted_sum(conv2d(x, t.constant(w1), std::nullopt, 1));
       }},
      {"conv_bias", {2}, [&](Tape& t, const Var& b) {
         return weighted_sum(conv2d(t.constant(img4), t.constant(w3), b, 2));
       }},
      {"upsample", {2, 2, 3}, [](Tape&, const Var& x) { return weighted_sum(upsample_nearest2x(x)); }},
      {"avg_pool", {2, 5, 4}, [](Tape&, const Var& x) { return weighted_sum(avg_pool2x(x)); }},
      {"global_avg_pool", {2, 3, 3}, [](Tape&, const Var& x) { return weighted_sum(global_avg_pool(x)); }},
      {"crop_resize", {2, 6, 5}, [](Tape&, const Var& x) {
         return weighted_sum(crop_resize(x, CropBox{1, 1, 4, 3}, 5, 4));
       }},
      {"reshape", {2, 6}, [](Tape&, const Var& x) { return weighted_sum(reshape(x, {3, 4})); }},
  };
  for (const Case& c : cases) {
    Rng local(17);
    Tensor x = local.normal_tensor(c.shape, 1.0);
    auto r = grad_check(c.f, x, 1e-6);
    EXPECT_LT(r.max_rel_error, 1e-5) << c.name;
  }
}

TEST(Tape, ReplayIsBitwiseDeterministic) {
  auto run = [] {
    Rng rng(21);
    Tape tape;
    Var x = tape.leaf(rng.normal_tensor({2, 5, 5}, 1.0), true);
    Var w = tape.leaf(rng.normal_tensor({3, 2, 3, 3}, 1.0), true);
    Var y = instance_norm(relu(conv2d(x, w, std::nullopt, 1)), 1e-5);
    Var loss = weighted_sum(softmax(reshape(y, {3, 25}), 1));
    backward(tape, loss);
    return std::make_pair(loss.value(), *tape.grad(w));
  };
  auto a = run();
  auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}
