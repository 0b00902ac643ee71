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

#include <array>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <vector>

#include "pdgan/adam.hpp"
#include "pdgan/app/checkpoint.hpp"
#include "pdgan/app/config.hpp"
#include "pdgan/data.hpp"
#include "pdgan/losses.hpp"
#include "pdgan/networks.hpp"

namespace pdgan::app {

/// Generator and discriminator with their parameter stores.
struct Model {
  /// Fresh initialization from the config's seed.
  explicit Model(const Config& cfg);
  /// Architecture from the embedded config, weights from the tensors.
  static Model from_checkpoint(const Checkpoint& ckpt);

  Checkpoint checkpoint() const;

  Config config;
  ParamStore gen_store;
  ParamStore disc_store;
  nets::GeneratorParams gen;
  nets::DiscriminatorParams disc;
};

struct TraceRow {
  long iter = 0;
  double d_loss = 0.0;
  std::array<double, 5> terms{};  // unweighted, in losses::kTermNames order
  double total = 0.0;
};

/// Heatmaps are cached per frame; samples are assembled on demand.
class SampleSource {
 public:
  SampleSource(const data::Dataset& ds, double sigma);
  PersonSample sample(const data::PairEntry& pair) const;

 private:
  const data::Dataset* ds_;
  std::vector<Tensor> heatmaps_;
};

/// One D update (adv_loss_d on real/fake targets) followed by one G update
/// (total_loss) per batch, both with Adam. Per-sample work may run on several
/// threads; gradients are reduced in batch order, so results do not depend
/// on the thread count.
class Trainer {
 public:
  Trainer(const Config& cfg, const data::Dataset& ds);

  TraceRow step();
  long iteration() const { return iter_; }
  const Model& model() const { return model_; }
  int threads() const { return threads_; }

 private:
  std::vector<data::PairEntry> next_batch();

  Model model_;
  const data::Dataset* ds_;
  SampleSource source_;
  std::vector<data::PairEntry> train_pairs_;
  losses::FrozenFeatureNet frozen_;
  losses::LossWeights weights_;
  losses::PartialLossConfig partial_;
  AdamState gen_adam_;
  AdamState disc_adam_;
  Rng order_rng_;
  std::vector<int> order_;
  std::size_t cursor_ = 0;
  int batch_size_;
  int threads_;
  long iter_ = 0;
};

/// Runs train.iters steps. Writes out/config.txt, out/trace.tsv (every
/// train.trace_every iterations), out/ckpt_NNNNNN.pdgn every
/// train.checkpoint_every iterations, and out/final.pdgn. Returns every row.
std::vector<TraceRow> run_training(const Config& cfg, const data::Dataset& ds,
                                   const std::filesystem::path& out_dir, std::ostream& log);

/// Generated image for one sample, forward only.
Tensor generate_image(const Model& model, const PersonSample& sample);

}  // namespace pdgan::app
