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

#include "pdgan/app/gradcheck_suite.hpp"

#include <algorithm>
#include <functional>
#include <map>

#include "pdgan/attention.hpp"
#include "pdgan/body_parts.hpp"
#include "pdgan/errors.hpp"
#include "pdgan/fourier.hpp"
#include "pdgan/losses.hpp"
#include "pdgan/networks.hpp"
#include "pdgan/ops.hpp"

namespace pdgan::app {
namespace {

using MultiFn = std::function<Var(const std::vector<Var>&)>;

// Fixed random output weights give every output entry an O(1) adjoint. The
// projection is taken about the base-point output, which leaves the gradient
// unchanged but keeps f near zero, so rounding in the final reduction does not
// swamp small derivatives.
Var weighted_sum(const Var& out, const Tensor& base) {
  Rng rng(7);
  Tape& tape = out.tape();
  return sum(mul(sub(out, tape.constant(base)), tape.constant(rng.normal_tensor(out.shape(), 1.0))));
}

void keep_worst(GradCheckResult& acc, const GradCheckResult& r) {
  if (acc.coords_checked == 0 || r.max_rel_error > acc.max_rel_error) {
    const std::size_t n = acc.coords_checked;
    acc = r;
    acc.coords_checked += n;
  } else {
    acc.coords_checked += r.coords_checked;
  }
}

// Pushes entries out of a band around zero so kinked ops (ReLU, |x|) are
// probed away from the kink.
Tensor away_from_zero(Tensor t, double band = 0.05) {
  for (double& v : t.values()) v = v < 0 ? v - band : v + band;
  return t;
}

// Checks d/d(input i) for each input in turn, the others held constant.
GradCheckResult check_inputs(const std::vector<Tensor>& inputs, const MultiFn& fn) {
  Tensor base;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(tape.constant(t));
    base = fn(vars).value();
  }
  GradCheckResult acc;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    ScalarFunction f = [&](Tape& tape, const Var& x) {
      std::vector<Var> vars;
      for (std::size_t j = 0; j < inputs.size(); ++j) {
        vars.push_back(j == i ? x : tape.constant(inputs[j]));
      }
      return weighted_sum(fn(vars), base);
    };
    keep_worst(acc, grad_check(f, inputs[i], kGradEps));
  }
  return acc;
}

// Checks up to per_param sampled coordinates of every parameter in store.
GradCheckResult check_params(const ParamStore& store, const ParamFunction& out, std::size_t per_param,
                             Rng& rng) {
  Tensor base;
  {
    Tape tape;
    ParamBinding bind(tape, store, false);
    base = out(bind).value();
  }
  const ParamFunction f = [&](ParamBinding& b) { return weighted_sum(out(b), base); };
  GradCheckResult acc;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const ParamId id = store.id(i);
    const std::size_t n = store.value(id).size();
    std::vector<std::size_t> coords;
    if (n <= per_param) {
      for (std::size_t k = 0; k < n; ++k) coords.push_back(k);
    } else {
      for (std::size_t k = 0; k < per_param; ++k) {
        coords.push_back(static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(n) - 1)));
      }
    }
    keep_worst(acc, grad_check_param(f, store, id, kGradEps, coords));
  }
  return acc;
}

void jitter(ParamStore& store, Rng& rng) {
  for (std::size_t i = 0; i < store.size(); ++i)
    for (double& v : store.value(store.id(i)).values()) v += 0.05 * rng.normal();
}

PersonSample random_sample(int h, int w, int k, Rng& rng) {
  PersonSample s;
  s.ref_image = rng.uniform_tensor({3, h, w}, 0.0, 1.0);
  s.tgt_image = rng.uniform_tensor({3, h, w}, 0.0, 1.0);
  s.ref_pose = rng.uniform_tensor({k, h, w}, 0.0, 1.0);
  s.tgt_pose = rng.uniform_tensor({k, h, w}, 0.0, 1.0);
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(h) * w);
  for (auto& l : labels) l = static_cast<std::uint8_t>(rng.uniform_int(0, parts::kPartCount - 1));
  s.ref_masks = parts::PartMaskSet::from_labels(labels, h, w);
  for (auto& l : labels) l = static_cast<std::uint8_t>(rng.uniform_int(0, parts::kPartCount - 1));
  s.tgt_masks = parts::PartMaskSet::from_labels(labels, h, w);
  return s;
}

using Emit = std::function<void(const std::string&, const GradCheckResult&)>;

void tensor_checks(Rng& rng, const Emit& emit) {
  auto u = [&](Shape s) { return rng.uniform_tensor(s, -1.0, 1.0); };
  auto wide = [](Tensor t) {
    t *= 5.0;
    return t;
  };
  emit("matmul", check_inputs({u({3, 4}), u({4, 5})}, [](auto& v) { return matmul(v[0], v[1]); }));
  emit("transpose", check_inputs({u({3, 4})}, [](auto& v) { return transpose(v[0]); }));
  emit("add_row_bias",
       check_inputs({u({3, 4}), u({4})}, [](auto& v) { return add_row_bias(v[0], v[1]); }));
  emit("add", check_inputs({u({2, 3, 4}), u({2, 3, 4})}, [](auto& v) { return add(v[0], v[1]); }));
  emit("sub", check_inputs({u({2, 3, 4}), u({2, 3, 4})}, [](auto& v) { return sub(v[0], v[1]); }));
  emit("mul", check_inputs({u({2, 3, 4}), u({2, 3, 4})}, [](auto& v) { return mul(v[0], v[1]); }));
  emit("scale", check_inputs({u({2, 3, 4})}, [](auto& v) { return scale(v[0], -1.7); }));
  emit("add_scalar", check_inputs({u({2, 3, 4})}, [](auto& v) { return add_scalar(v[0], 0.3); }));
  emit("relu", check_inputs({away_from_zero(u({2, 3, 4}))}, [](auto& v) { return relu(v[0]); }));
  emit("sigmoid", check_inputs({u({2, 3, 4})}, [](auto& v) { return sigmoid(v[0]); }));
  emit("abs", check_inputs({away_from_zero(u({2, 3, 4}))}, [](auto& v) { return abs(v[0]); }));
  emit("square", check_inputs({u({2, 3, 4})}, [](auto& v) { return square(v[0]); }));
  emit("softplus", check_inputs({wide(u({2, 3, 4}))}, [](auto& v) { return softplus(v[0]); }));
  emit("sum", check_inputs({u({2, 3, 4})}, [](auto& v) { return sum(v[0]); }));
  emit("mean", check_inputs({u({2, 3, 4})}, [](auto& v) { return mean(v[0]); }));
  emit("softmax[0]", check_inputs({u({4, 5})}, [](auto& v) { return softmax(v[0], 0); }));
  emit("softmax[1]", check_inputs({u({4, 5})}, [](auto& v) { return softmax(v[0], 1); }));
  emit("instance_norm",
       check_inputs({u({3, 4, 5})}, [](auto& v) { return instance_norm(v[0], 1e-5); }));
  emit("channel_affine", check_inputs({u({3, 4, 5}), u({3}), u({3})},
                                      [](auto& v) { return channel_affine(v[0], v[1], v[2]); }));
  emit("adain", check_inputs({u({3, 4, 5}), u({3}), u({3})},
                             [](auto& v) { return adain(v[0], v[1], v[2], 1e-5); }));
  emit("reshape", check_inputs({u({2, 3, 4})}, [](auto& v) { return reshape(v[0], {6, 4}); }));
  emit("concat", check_inputs({u({2, 3}), u({2, 4})}, [](auto& v) {
         return concat({v[0], v[1]}, 1);
       }));
  emit("slice", check_inputs({u({3, 6})}, [](auto& v) { return slice(v[0], 1, 1, 4); }));
  emit("concat_channels", check_inputs({u({2, 3, 4}), u({1, 3, 4})}, [](auto& v) {
         return concat_channels({v[0], v[1]});
       }));
  emit("conv2d[s1]", check_inputs({u({2, 5, 6}), u({3, 2, 3, 3}), u({3})}, [](auto& v) {
         return conv2d(v[0], v[1], v[2], 1);
       }));
  emit("conv2d[s2]", check_inputs({u({2, 6, 7}), u({3, 2, 3, 3}), u({3})}, [](auto& v) {
         return conv2d(v[0], v[1], v[2], 2);
       }));
  emit("conv2d[1x1]", check_inputs({u({4, 3, 5}), u({2, 4, 1, 1})}, [](auto& v) {
         return conv2d(v[0], v[1], std::nullopt, 1);
       }));
  emit("upsample_nearest2x",
       check_inputs({u({2, 3, 4})}, [](auto& v) { return upsample_nearest2x(v[0]); }));
  emit("avg_pool2x", check_inputs({u({2, 5, 6})}, [](auto& v) { return avg_pool2x(v[0]); }));
  emit("global_avg_pool",
       check_inputs({u({3, 4, 5})}, [](auto& v) { return global_avg_pool(v[0]); }));
  emit("crop_resize", check_inputs({u({2, 8, 9})}, [](auto& v) {
         return crop_resize(v[0], CropBox{1, 2, 5, 6}, 4, 3);
       }));
}

void fourier_checks(Rng& rng, const Emit& emit) {
  emit("rfft2", check_inputs({rng.uniform_tensor({2, 4, 6}, -1, 1)},
                             [](auto& v) { return fourier::rfft2(v[0]); }));
  emit("irfft2", check_inputs({rng.uniform_tensor({4, 4, 4}, -1, 1)},
                              [](auto& v) { return fourier::irfft2(v[0], 6); }));
  emit("irfft2[odd]", check_inputs({rng.uniform_tensor({2, 3, 3}, -1, 1)},
                                   [](auto& v) { return fourier::irfft2(v[0], 5); }));
  ParamStore store;
  const auto p = fourier::make_fft_block(store, "fft", 3, true, rng);
  jitter(store, rng);
  const Tensor x = rng.uniform_tensor({3, 4, 6}, -1, 1);
  GradCheckResult r = check_inputs({x}, [&](auto& v) {
    ParamBinding bind(v[0].tape(), store, false);
    return fourier::fft_block(bind, p, v[0]);
  });
  keep_worst(r, check_params(store, [&](ParamBinding& b) {
    return fourier::fft_block(b, p, b.tape().constant(x));
  }, 8, rng));
  emit("fft_block", r);
}

void attention_checks(Rng& rng, const Emit& emit) {
  using namespace attention;
  auto u = [&](Shape s) { return rng.uniform_tensor(s, -1.0, 1.0); };
  emit("scaled_dot_attention", check_inputs({u({5, 4}), u({6, 4}), u({6, 3})}, [](auto& v) {
         return scaled_dot_attention(v[0], v[1], v[2]).output;
       }));
  {
    ParamStore store;
    const MhaParams p = make_mha(store, "mha", 4, 2, true, rng);
    const Tensor q = u({5, 4}), kv = u({6, 4});
    GradCheckResult r = check_inputs({q, kv}, [&](auto& v) {
      ParamBinding bind(v[0].tape(), store, false);
      return mha(bind, p, v[0], v[1], v[1]);
    });
    keep_worst(r, check_params(store, [&](ParamBinding& b) {
      return mha(b, p, b.tape().constant(q), b.tape().constant(kv), b.tape().constant(kv));
    }, 8, rng));
    emit("mha", r);
  }
  {
    ParamStore store;
    const MlpParams p = make_mlp(store, "mlp", 4, 8, rng);
    jitter(store, rng);
    const Tensor x = u({5, 4});
    GradCheckResult r = check_inputs({x}, [&](auto& v) {
      ParamBinding bind(v[0].tape(), store, false);
      return mlp(bind, p, v[0]);
    });
    keep_worst(r, check_params(store, [&](ParamBinding& b) {
      return mlp(b, p, b.tape().constant(x));
    }, 8, rng));
    emit("mlp", r);
  }
  {
    ParamStore store;
    TransformerConfig cfg;
    cfg.embed_dim = 4;
    const auto p = make_transformer_module(store, "tm", cfg, rng);
    jitter(store, rng);
    const Tensor ref = u({4, 4, 4}), tgt = u({4, 4, 4});
    auto run = [&](ParamBinding& b, const Var& fr, const Var& ft) {
      return transformer_module(b, p, to_tokens(fr), to_tokens(ft), 1e-5).values;
    };
    GradCheckResult r = check_inputs({ref, tgt}, [&](auto& v) {
      ParamBinding bind(v[0].tape(), store, false);
      return run(bind, v[0], v[1]);
    });
    keep_worst(r, check_params(store, [&](ParamBinding& b) {
      return run(b, b.tape().constant(ref), b.tape().constant(tgt));
    }, 6, rng));
    emit("transformer_module", r);
  }
}

void parts_checks(Rng& rng, const Emit& emit) {
  ParamStore store;
  parts::PartEncoderConfig cfg;
  cfg.active_parts = {0, 2, 5};
  cfg.hidden = 3;
  cfg.feature = 3;
  cfg.texture_dim = 4;
  const auto p = parts::make_part_encoder(store, "parts", cfg, rng);
  jitter(store, rng);
  const PersonSample s = random_sample(8, 8, 1, rng);
  const std::vector<Tensor> images = parts::decouple(s.ref_image, s.ref_masks);
  emit("encode_parts", check_inputs({images[0], images[2], images[5]}, [&](auto& v) {
         ParamBinding bind(v[0].tape(), store, false);
         return concat_channels(parts::encode_parts(bind, p, v));
       }));
  const std::vector<Tensor> feats = {rng.uniform_tensor({3, 2, 2}, -1, 1),
                                     rng.uniform_tensor({3, 2, 2}, -1, 1),
                                     rng.uniform_tensor({3, 2, 2}, -1, 1)};
  emit("fuse", check_inputs(feats, [&](auto& v) {
         ParamBinding bind(v[0].tape(), store, false);
         return parts::fuse(bind, p, v);
       }));
  emit("texture_code", check_params(store, [&](ParamBinding& b) {
         return parts::texture_code(b, p, s.ref_image, s.ref_masks);
       }, 10, rng));
}

nets::GeneratorConfig tiny_generator() {
  nets::GeneratorConfig cfg;
  cfg.keypoints = 3;
  cfg.d = 4;
  cfg.encoder_hidden = 4;
  cfg.heads = 2;
  cfg.n_transformer = 1;
  cfg.texture_dim = 4;
  cfg.part_hidden = 3;
  cfg.part_feature = 3;
  cfg.decoder_hidden = 4;
  cfg.decoder_out = 3;
  return cfg;
}

void network_checks(Rng& rng, const Emit& emit) {
  for (bool transformer : {true, false}) {
    ParamStore store;
    nets::GeneratorConfig cfg = tiny_generator();
    cfg.use_transformer = transformer;
    const auto g = nets::make_generator(store, cfg, rng);
    jitter(store, rng);
    const PersonSample s = random_sample(16, 16, 3, rng);
    emit(transformer ? "generator" : "generator[no_transformer]",
         check_params(store, [&](ParamBinding& b) {
           return nets::generate(b, g, s).image;
         }, 8, rng));
  }
  {
    ParamStore store;
    nets::DiscriminatorConfig cfg;
    cfg.c1 = 3;
    cfg.c2 = 4;
    const auto d = nets::make_discriminator(store, cfg, rng);
    jitter(store, rng);
    const Tensor img = rng.uniform_tensor({3, 16, 16}, 0, 1);
    auto run = [&](ParamBinding& b, const Var& x) {
      const auto logits = nets::discriminate(b, d, x);
      std::vector<Var> flat;
      for (const Var& z : logits) flat.push_back(reshape(z, {static_cast<int>(z.value().size())}));
      return concat(flat, 0);
    };
    GradCheckResult r = check_inputs({img}, [&](auto& v) {
      ParamBinding bind(v[0].tape(), store, false);
      return run(bind, v[0]);
    });
    keep_worst(r, check_params(store, [&](ParamBinding& b) {
      return run(b, b.tape().constant(img));
    }, 8, rng));
    emit("discriminator", r);
  }
}

void loss_checks(Rng& rng, const Emit& emit) {
  const losses::FrozenFeatureNet net;
  const Tensor gen = rng.uniform_tensor({3, 16, 16}, 0, 1);
  const Tensor tgt = rng.uniform_tensor({3, 16, 16}, 0, 1);
  const ScalarFunction l1 = [&](Tape& t, const Var& x) {
    return losses::l1_loss(x, t.constant(tgt));
  };
  emit("l1_loss", grad_check(l1, gen, kGradEps));
  const Tensor real0 = rng.uniform_tensor({1, 4, 4}, -2, 2), real1 = rng.uniform_tensor({1, 2, 2}, -2, 2);
  const Tensor fake0 = rng.uniform_tensor({1, 4, 4}, -2, 2), fake1 = rng.uniform_tensor({1, 2, 2}, -2, 2);
  emit("adv_loss_d", check_inputs({real0, real1, fake0, fake1}, [](auto& v) {
         return losses::adv_loss_d({v[0], v[1]}, {v[2], v[3]});
       }));
  emit("adv_loss_g", check_inputs({fake0, fake1}, [](auto& v) {
         return losses::adv_loss_g({v[0], v[1]});
       }));
  // The frozen net has ReLUs, so only a sample of input coordinates is probed.
  std::vector<std::size_t> coords;
  for (int i = 0; i < 48; ++i) coords.push_back(static_cast<std::size_t>(rng.uniform_int(0, 767)));
  const ScalarFunction per = [&](Tape& t, const Var& x) {
    return losses::perceptual_loss(net, x, t.constant(tgt));
  };
  emit("perceptual_loss", grad_check(per, gen, kGradEps, coords));
  emit("gram", check_inputs({rng.uniform_tensor({3, 4, 5}, -1, 1)},
                            [](auto& v) { return losses::gram(v[0]); }));
  const ScalarFunction style = [&](Tape& t, const Var& x) {
    return losses::style_loss(net, x, t.constant(tgt));
  };
  emit("style_loss", grad_check(style, gen, kGradEps, coords));
  std::vector<std::uint8_t> labels(256, static_cast<std::uint8_t>(parts::Part::kBackground));
  for (int i = 3; i < 11; ++i)
    for (int j = 4; j < 12; ++j) labels[i * 16 + j] = static_cast<std::uint8_t>(parts::Part::kUpperClothes);
  const auto masks = parts::PartMaskSet::from_labels(labels, 16, 16);
  const ScalarFunction partial = [&](Tape& t, const Var& x) {
    return losses::partial_loss(net, x, t.constant(tgt), masks);
  };
  emit("partial_loss", grad_check(partial, gen, kGradEps, coords));
  const Tensor terms = rng.uniform_tensor({5}, 0.1, 2.0);
  const ScalarFunction total = [&](Tape&, const Var& x) {
    losses::LossTerms t;
    Var* slots[] = {&t.l1, &t.adv, &t.per, &t.style, &t.par};
    for (int k = 0; k < 5; ++k) *slots[k] = slice(x, 0, k, k + 1);
    return losses::total_loss(t, losses::LossWeights{});
  };
  emit("total_loss", grad_check(total, terms, kGradEps));
}

}  // namespace

std::vector<GradCheckEntry> run_gradchecks(const std::string& module, std::uint64_t seed) {
  using Suite = void (*)(Rng&, const Emit&);
  const std::pair<const char*, Suite> suites[] = {
      {"tensor", tensor_checks},   {"fourier", fourier_checks}, {"attention", attention_checks},
      {"parts", parts_checks},     {"networks", network_checks}, {"losses", loss_checks}};
  bool known = module == "all";
  for (const auto& [name, fn] : suites) known = known || module == name;
  if (!known) {
    throw UsageError("unknown gradcheck module '" + module +
                     "' (expected tensor, fourier, attention, parts, networks, losses or all)");
  }
  std::vector<GradCheckEntry> out;
  for (std::size_t i = 0; i < std::size(suites); ++i) {
    const auto& [name, fn] = suites[i];
    if (module != "all" && module != name) continue;
    // Each module draws from its own stream so `all` and single-module runs agree.
    Rng rng(seed * 1000003ull + i);
    const std::string mod = name;
    fn(rng, [&](const std::string& op, const GradCheckResult& r) { out.push_back({mod, op, r}); });
  }
  return out;
}

}  // namespace pdgan::app
