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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "attention_oracle.hpp"
#include "pdgan/attention.hpp"
#include "pdgan/errors.hpp"
#include "pdgan/gradcheck.hpp"
#include "pdgan/ops.hpp"
#include "test_util.hpp"

using namespace pdgan;
using namespace pdgan::attention;
using pdgan::test_util::Matrix;

namespace {

Tensor permute_rows(const Tensor& t, const std::vector<int>& perm) {
  Tensor out(t.shape());
  for (int i = 0; i < t.dim(0); ++i)
    for (int j = 0; j < t.dim(1); ++j) out.at(i, j) = t.at(perm[i], j);
  return out;
}

void zero_params(ParamStore& store) {
  for (std::size_t i = 0; i < store.size(); ++i) store.value(store.id(i)).fill(0.0);
}

TokenSequence const_tokens(Tape& tape, const Tensor& fmap) {
  return to_tokens(tape.constant(fmap));
}

}  // namespace

TEST(Tokens, FlattenUnflattenIsIdentity) {
  Rng rng(3);
  Tape tape;
  Tensor fmap = rng.normal_tensor({5, 3, 4}, 1.0);
  TokenSequence t = to_tokens(tape.constant(fmap));
  EXPECT_EQ(t.length(), 12);
  EXPECT_EQ(t.embed_dim(), 5);
  // token (i*W + j) holds the channel vector at pixel (i, j)
  EXPECT_EQ(t.values.value().at(1 * 4 + 2, 3), fmap.at(3, 1, 2));
  EXPECT_EQ(to_feature_map(t).value(), fmap);
}

TEST(ScaledDot, SingleKeyReturnsItsValue) {
  Tape tape;
  Var q = tape.constant(Tensor::from_rows({{0.3, -2.0}, {5.0, 1.0}, {0.0, 0.0}}));
  Var k = tape.constant(Tensor::from_rows({{1.5, 0.25}}));
  Var v = tape.constant(Tensor::from_rows({{7.0, -3.0, 2.0}}));
  Tensor out = scaled_dot_attention(q, k, v).output.value();
  for (int i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(out.at(i, 0), 7.0);
    EXPECT_DOUBLE_EQ(out.at(i, 1), -3.0);
    EXPECT_DOUBLE_EQ(out.at(i, 2), 2.0);
  }
}

TEST(ScaledDot, OrthogonalQueryAveragesValues) {
  Tape tape;
  Var q = tape.constant(Tensor::from_rows({{0.0, 1.0}}));
  Var k = tape.constant(Tensor::from_rows({{1.0, 0.0}, {-2.0, 0.0}, {4.0, 0.0}}));
  Var v = tape.constant(Tensor::from_rows({{1.0, 10.0}, {2.0, 20.0}, {6.0, 0.0}}));
  Tensor out = scaled_dot_attention(q, k, v).output.value();
  EXPECT_NEAR(out.at(0, 0), 3.0, 1e-15);
  EXPECT_NEAR(out.at(0, 1), 10.0, 1e-14);
}

TEST(ScaledDot, WorkedTwoByTwoExample) {
  const Matrix q{{1, 0}}, k{{1, 0}, {0, 1}}, v{{1, 2}, {3, 4}};
  Matrix oracle_w;
  const Matrix oracle = test_util::naive_attention(q, k, v, &oracle_w);
  // Closed form: w0 = 1 / (1 + exp(-1/sqrt(2))).
  const double w0 = 1.0 / (1.0 + std::exp(-1.0 / std::sqrt(2.0)));
  ASSERT_NEAR(oracle_w[0][0], w0, 1e-15);
  ASSERT_NEAR(oracle_w[0][0], 0.669762, 1e-6);
  ASSERT_NEAR(oracle[0][0], 1.660477, 1e-6);

  Tape tape;
  AttentionResult r = scaled_dot_attention(tape.constant(Tensor::from_rows({{1, 0}})),
                                           tape.constant(Tensor::from_rows({{1, 0}, {0, 1}})),
                                           tape.constant(Tensor::from_rows({{1, 2}, {3, 4}})));
  EXPECT_NEAR(r.weights.value().at(0, 0), oracle_w[0][0], 1e-12);
  EXPECT_NEAR(r.weights.value().at(0, 1), oracle_w[0][1], 1e-12);
  EXPECT_NEAR(r.output.value().at(0, 0), oracle[0][0], 1e-12);
  EXPECT_NEAR(r.output.value().at(0, 1), oracle[0][1], 1e-12);
}

TEST(ScaledDot, MatchesLoopOracleAndRowsSumToOne) {
  Rng rng(17);
  Tape tape;
  Tensor q = rng.normal_tensor({6, 4}, 2.0), k = rng.normal_tensor({9, 4}, 2.0),
         v = rng.normal_tensor({9, 3}, 1.0);
  AttentionResult r =
      scaled_dot_attention(tape.constant(q), tape.constant(k), tape.constant(v));
  const Matrix oracle = test_util::naive_attention(test_util::to_matrix(q),
                                                   test_util::to_matrix(k),
                                                   test_util::to_matrix(v));
  for (int i = 0; i < 6; ++i) {
    double row = 0.0;
    for (int j = 0; j < 9; ++j) row += r.weights.value().at(i, j);
    EXPECT_NEAR(row, 1.0, 1e-12);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(r.output.value().at(i, c), oracle[i][c], 1e-12);
  }
}

TEST(ScaledDot, ScaledQueriesStayRowStochastic) {
  Rng rng(5);
  Tape tape;
  Tensor q = rng.normal_tensor({4, 4}, 1.0), k = rng.normal_tensor({5, 4}, 1.0),
         v = rng.normal_tensor({5, 4}, 1.0);
  Tensor base = scaled_dot_attention(tape.constant(q), tape.constant(k), tape.constant(v))
                    .weights.value();
  for (double c : {0.1, 3.0, 40.0}) {
    Tensor qs = q;
    qs *= c;
    Tensor w = scaled_dot_attention(tape.constant(qs), tape.constant(k), tape.constant(v))
                   .weights.value();
    EXPECT_GT(max_abs_diff(w, base), 1e-6);
    for (int i = 0; i < 4; ++i) {
      double row = 0.0;
      for (int j = 0; j < 5; ++j) {
        EXPECT_GE(w.at(i, j), 0.0);
        row += w.at(i, j);
      }
      EXPECT_NEAR(row, 1.0, 1e-12);
    }
  }
}

TEST(ScaledDot, WidthMismatchThrows) {
  Tape tape;
  Var a = tape.constant(Tensor({2, 3}));
  Var b = tape.constant(Tensor({2, 4}));
  EXPECT_THROW(scaled_dot_attention(a, b, b), ShapeError);
  EXPECT_THROW(scaled_dot_attention(a, a, tape.constant(Tensor({3, 3}))), ShapeError);
}

TEST(Mha, SingleHeadIdentityProjectionsEqualAttention) {
  Rng rng(8);
  ParamStore store;
  MhaParams p = make_mha(store, "m", 3, 1, true, rng);
  for (ParamId id : {p.wq[0], p.wk[0], p.wv[0], p.wo}) {
    Tensor& w = store.value(id);
    w.fill(0.0);
    for (int i = 0; i < 3; ++i) w.at(i, i) = 1.0;
  }
  Tape tape;
  ParamBinding bind(tape, store, false);
  Tensor q = rng.normal_tensor({4, 3}, 1.0), kv = rng.normal_tensor({5, 3}, 1.0);
  Var out = mha(bind, p, tape.constant(q), tape.constant(kv), tape.constant(kv));
  Var ref = scaled_dot_attention(tape.constant(q), tape.constant(kv), tape.constant(kv)).output;
  EXPECT_LT(max_abs_diff(out.value(), ref.value()), 1e-15);
}

TEST(Mha, MatchesPerHeadLoopOracle) {
  for (bool projection : {true, false}) {
    Rng rng(21);
    ParamStore store;
    MhaParams p = make_mha(store, "m", 4, 2, projection, rng);
    Tensor q = rng.normal_tensor({3, 4}, 1.0), k = rng.normal_tensor({3, 4}, 1.0),
           v = rng.normal_tensor({3, 4}, 1.0);
    Tape tape;
    ParamBinding bind(tape, store, false);
    Tensor out = mha(bind, p, tape.constant(q), tape.constant(k), tape.constant(v)).value();

    using test_util::naive_matmul, test_util::to_matrix;
    Matrix joined(3);
    for (int h = 0; h < 2; ++h) {
      Matrix head = test_util::naive_attention(
          naive_matmul(to_matrix(q), to_matrix(store.value(p.wq[h]))),
          naive_matmul(to_matrix(k), to_matrix(store.value(p.wk[h]))),
          naive_matmul(to_matrix(v), to_matrix(store.value(p.wv[h]))));
      for (int i = 0; i < 3; ++i) joined[i].insert(joined[i].end(), head[i].begin(), head[i].end());
    }
    Matrix expect = projection ? naive_matmul(joined, to_matrix(store.value(p.wo))) : joined;
    for (int i = 0; i < 3; ++i)
      for (int c = 0; c < 4; ++c) EXPECT_NEAR(out.at(i, c), expect[i][c], 1e-12);
  }
}

TEST(Mha, KeyValuePermutationInvariance) {
  Rng rng(4);
  ParamStore store;
  MhaParams p = make_mha(store, "m", 6, 2, true, rng);
  Tensor q = rng.normal_tensor({4, 6}, 1.0), k = rng.normal_tensor({7, 6}, 1.0),
         v = rng.normal_tensor({7, 6}, 1.0);
  const std::vector<int> perm{3, 0, 6, 1, 5, 2, 4};
  Tape tape;
  ParamBinding bind(tape, store, false);
  Tensor a = mha(bind, p, tape.constant(q), tape.constant(k), tape.constant(v)).value();
  Tensor b = mha(bind, p, tape.constant(q), tape.constant(permute_rows(k, perm)),
                 tape.constant(permute_rows(v, perm)))
                 .value();
  EXPECT_LT(max_abs_diff(a, b), 1e-12);

  const std::vector<int> qperm{2, 3, 1, 0};
  Tensor c = mha(bind, p, tape.constant(permute_rows(q, qperm)), tape.constant(k),
                 tape.constant(v))
                 .value();
  EXPECT_LT(max_abs_diff(c, permute_rows(a, qperm)), 1e-12);
}

TEST(Mha, HeadCountMustDivideWidth) {
  Rng rng(0);
  ParamStore store;
  EXPECT_THROW(make_mha(store, "m", 6, 4, true, rng), ShapeError);
  EXPECT_THROW(make_mha(store, "n", 6, 0, true, rng), ShapeError);
}

TEST(TransformerModule, PreservesShape) {
  Rng rng(6);
  ParamStore store;
  TransformerConfig cfg;
  cfg.embed_dim = 8;
  auto p = make_transformer_module(store, "t", cfg, rng);
  Tape tape;
  ParamBinding bind(tape, store, false);
  TokenSequence fr = const_tokens(tape, rng.normal_tensor({8, 2, 2}, 1.0));
  TokenSequence ft = const_tokens(tape, rng.normal_tensor({8, 2, 2}, 1.0));
  TokenSequence out = transformer_module(bind, p, fr, ft, 1e-5);
  EXPECT_EQ(out.values.shape(), (Shape{4, 8}));
  EXPECT_EQ(out.height, 2);
  EXPECT_EQ(out.width, 2);
  EXPECT_TRUE(out.values.value().all_finite());
}

TEST(TransformerModule, ZeroedBranchesLeaveTripleInstanceNorm) {
  Rng rng(10);
  ParamStore store;
  TransformerConfig cfg;
  cfg.embed_dim = 8;
  auto p = make_transformer_module(store, "t", cfg, rng);
  zero_params(store);
  Tape tape;
  ParamBinding bind(tape, store, false);
  Tensor fr = rng.normal_tensor({8, 3, 4}, 2.0);
  Tensor ft = rng.normal_tensor({8, 3, 4}, 2.0);
  TokenSequence out =
      transformer_module(bind, p, const_tokens(tape, fr), const_tokens(tape, ft), 1e-5);
  Var x = tape.constant(fr);
  Var expect = instance_norm(instance_norm(instance_norm(x, 1e-5), 1e-5), 1e-5);
  EXPECT_LT(max_abs_diff(to_feature_map(out).value(), expect.value()), 1e-12);
}

TEST(TransformerModule, SharedGeometryRequired) {
  Rng rng(1);
  ParamStore store;
  TransformerConfig cfg;
  cfg.embed_dim = 4;
  auto p = make_transformer_module(store, "t", cfg, rng);
  Tape tape;
  ParamBinding bind(tape, store, false);
  TokenSequence a = const_tokens(tape, rng.normal_tensor({4, 2, 3}, 1.0));
  TokenSequence b = const_tokens(tape, rng.normal_tensor({4, 3, 2}, 1.0));
  EXPECT_THROW(transformer_module(bind, p, a, b, 1e-5), ShapeError);
  TokenSequence c = const_tokens(tape, rng.normal_tensor({6, 2, 3}, 1.0));
  EXPECT_THROW(transformer_module(bind, p, c, c, 1e-5), ShapeError);
}

TEST(TransformerModule, GradCheckInputsAndEveryParameter) {
  Rng rng(12);
  ParamStore store;
  TransformerConfig cfg;
  cfg.embed_dim = 4;
  auto p = make_transformer_module(store, "t", cfg, rng);
  // Nonzero biases so their adjoints pass through generic ReLU patterns.
  for (std::size_t i = 0; i < store.size(); ++i) {
    Tensor& t = store.value(store.id(i));
    if (store.name(store.id(i)).find(".b") != std::string::npos) t = rng.normal_tensor(t.shape(), 0.1);
  }
  const Tensor fr = rng.normal_tensor({4, 2, 2}, 1.0);
  const Tensor ft = rng.normal_tensor({4, 2, 2}, 1.0);

  auto wrt_ref = [&](Tape& tape, const Var& x) {
    ParamBinding bind(tape, store, false);
    return test_util::weighted_sum(
        transformer_module(bind, p, to_tokens(x), const_tokens(tape, ft), 1e-5).values);
  };
  EXPECT_LT(grad_check(wrt_ref, fr).max_rel_error, 1e-5);
  auto wrt_tgt = [&](Tape& tape, const Var& x) {
    ParamBinding bind(tape, store, false);
    return test_util::weighted_sum(
        transformer_module(bind, p, const_tokens(tape, fr), to_tokens(x), 1e-5).values);
  };
  EXPECT_LT(grad_check(wrt_tgt, ft).max_rel_error, 1e-5);

  auto loss = [&](ParamBinding& bind) {
    Tape& tape = bind.tape();
    return test_util::weighted_sum(
        transformer_module(bind, p, const_tokens(tape, fr), const_tokens(tape, ft), 1e-5).values);
  };
  for (std::size_t i = 0; i < store.size(); ++i) {
    const ParamId id = store.id(i);
    const std::size_t n = store.value(id).size();
    Rng pick(i);
    auto coords = test_util::sample_coords(n, std::min<std::size_t>(n, 6), pick);
    GradCheckResult r = grad_check_param(loss, store, id, 1e-6, coords);
    EXPECT_LT(r.max_rel_error, 1e-5) << store.name(id);
    EXPECT_GT(std::abs(r.analytic_at_worst) + std::abs(r.numeric_at_worst), 1e-7)
        << store.name(id) << " gradient is too small to be a meaningful check";
  }
}

TEST(TransformerModule, NoDeadParameters) {
  Rng rng(30);
  ParamStore store;
  TransformerConfig cfg;
  cfg.embed_dim = 8;
  auto p = make_transformer_module(store, "t", cfg, rng);
  Tape tape;
  ParamBinding bind(tape, store, true);
  TokenSequence out = transformer_module(bind, p, const_tokens(tape, rng.normal_tensor({8, 3, 3}, 1.0)),
                                         const_tokens(tape, rng.normal_tensor({8, 3, 3}, 1.0)), 1e-5);
  backward(tape, test_util::weighted_sum(out.values));
  std::vector<Tensor> grads = store.zeros_like();
  bind.accumulate_grads(grads);
  for (std::size_t i = 0; i < store.size(); ++i) {
    double mag = 0.0;
    for (double g : grads[i].values()) mag += std::abs(g);
    EXPECT_GT(mag, 1e-10) << store.name(store.id(i));
  }
}

TEST(TransformerStack, OneAndTwoModulesCompose) {
  Rng rng(2);
  ParamStore store;
  TransformerConfig cfg;
  cfg.embed_dim = 4;
  std::vector<TransformerModuleParams> mods{make_transformer_module(store, "t0", cfg, rng),
                                            make_transformer_module(store, "t1", cfg, rng)};
  Tape tape;
  ParamBinding bind(tape, store, false);
  TokenSequence fr = const_tokens(tape, rng.normal_tensor({4, 2, 3}, 1.0));
  TokenSequence ft = const_tokens(tape, rng.normal_tensor({4, 2, 3}, 1.0));

  TokenSequence one = transformer_stack(bind, std::span(mods).first(1), fr, ft, 1e-5);
  EXPECT_EQ(one.values.value(), transformer_module(bind, mods[0], fr, ft, 1e-5).values.value());

  TokenSequence two = transformer_stack(bind, mods, fr, ft, 1e-5);
  TokenSequence manual =
      transformer_module(bind, mods[1], transformer_module(bind, mods[0], fr, ft, 1e-5), ft, 1e-5);
  EXPECT_EQ(two.values.value(), manual.values.value());
  Var fmap = to_feature_map(two);
  EXPECT_EQ(fmap.shape(), (Shape{4, 2, 3}));

  EXPECT_THROW(transformer_stack(bind, std::span<const TransformerModuleParams>{}, fr, ft, 1e-5),
               ShapeError);
}

TEST(PositionalEncoding, BoundedAndDistinctPerToken) {
  Tensor pe = positional_encoding(4, 3, 8);
  EXPECT_EQ(pe.shape(), (Shape{12, 8}));
  for (double x : pe.values()) EXPECT_LE(std::abs(x), 1.0);
  for (int a = 0; a < 12; ++a)
    for (int b = a + 1; b < 12; ++b) {
      double d = 0.0;
      for (int c = 0; c < 8; ++c) d += std::abs(pe.at(a, c) - pe.at(b, c));
      EXPECT_GT(d, 1e-6);
    }
}
