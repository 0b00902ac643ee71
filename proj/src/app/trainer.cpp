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

#include "pdgan/app/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <ostream>
#include <thread>

#include "pdgan/errors.hpp"
#include "pdgan/ops.hpp"

namespace pdgan::app {
namespace {

// Runs fn(0..n-1) on up to `threads` workers; rethrows the lowest-index
// failure after all workers finish.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](int i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const int workers = std::min(threads, n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        for (int i = t; i < n; i += workers) run(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void add_into(std::vector<Tensor>& into, const std::vector<Tensor>& from) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += from[i];
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trace_line(const TraceRow& r) {
  std::string line = std::to_string(r.iter) + "\t" + fmt(r.d_loss);
  for (double t : r.terms) line += "\t" + fmt(t);
  return line + "\t" + fmt(r.total) + "\n";
}

}  // namespace

Model::Model(const Config& cfg) : config(cfg) {
  Rng rng(static_cast<std::uint64_t>(cfg.get_int("seed")));
  gen = nets::make_generator(gen_store, generator_config(cfg), rng);
  disc = nets::make_discriminator(disc_store, discriminator_config(cfg), rng);
}

Model Model::from_checkpoint(const Checkpoint& ckpt) {
  Model m(Config::parse(ckpt.config_text, "checkpoint config"));
  restore_params(m.gen_store, ckpt);
  restore_params(m.disc_store, ckpt);
  return m;
}

Checkpoint Model::checkpoint() const {
  Checkpoint c;
  c.config_text = config.resolved();
  append_params(c, gen_store);
  append_params(c, disc_store);
  return c;
}

SampleSource::SampleSource(const data::Dataset& ds, double sigma) : ds_(&ds) {
  for (const data::Frame& f : ds.frames) {
    heatmaps_.push_back(
        data::pose_to_heatmaps(f.keypoints, f.image.dim(1), f.image.dim(2), sigma).maps);
  }
}

PersonSample SampleSource::sample(const data::PairEntry& pair) const {
  const data::Frame& ref = ds_->frames.at(pair.ref);
  const data::Frame& tgt = ds_->frames.at(pair.tgt);
  PersonSample s;
  s.ref_image = ref.image;
  s.tgt_image = tgt.image;
  s.ref_pose = heatmaps_[pair.ref];
  s.tgt_pose = heatmaps_[pair.tgt];
  s.ref_masks = ref.masks;
  s.tgt_masks = tgt.masks;
  s.identity = ref.identity;
  s.ref_pose_id = ref.pose;
  s.tgt_pose_id = tgt.pose;
  s.ref_stem = ref.stem;
  s.tgt_stem = tgt.stem;
  return s;
}

Trainer::Trainer(const Config& cfg, const data::Dataset& ds)
    : model_(cfg),
      ds_(&ds),
      source_(ds, cfg.get_real("data.sigma")),
      train_pairs_(ds.split("train")),
      frozen_(static_cast<std::uint64_t>(cfg.get_int("frozen_net.seed"))),
      weights_(loss_weights(cfg)),
      gen_adam_(model_.gen_store, adam_config(cfg)),
      disc_adam_(model_.disc_store, adam_config(cfg)),
      order_rng_(static_cast<std::uint64_t>(cfg.get_int("seed")) ^ 0x9E3779B97F4A7C15ull),
      batch_size_(static_cast<int>(cfg.get_int("train.batch_size"))) {
  if (train_pairs_.empty()) throw DataError("dataset has no train pairs");
  if (batch_size_ < 1) throw UsageError("train.batch_size must be positive");
  if (ds.height() != cfg.get_int("data.h") || ds.width() != cfg.get_int("data.w")) {
    throw DataError("dataset images are " + std::to_string(ds.height()) + "x" +
                    std::to_string(ds.width()) + " but config says data.h=" +
                    std::to_string(cfg.get_int("data.h")) + ", data.w=" +
                    std::to_string(cfg.get_int("data.w")));
  }
  if (ds.frames[0].keypoints.dim(0) != cfg.get_int("data.keypoints")) {
    throw DataError("dataset has " + std::to_string(ds.frames[0].keypoints.dim(0)) +
                    " keypoints but config says data.keypoints=" +
                    std::to_string(cfg.get_int("data.keypoints")));
  }
  partial_.crop_size = static_cast<int>(cfg.get_int("loss.crop_size"));
  const long t = cfg.get_int("train.threads");
  threads_ = t > 0 ? static_cast<int>(t)
                   : std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  order_.resize(train_pairs_.size());
  std::iota(order_.begin(), order_.end(), 0);
  cursor_ = order_.size();
}

// Walks a fresh shuffle of the train pairs each epoch.
std::vector<data::PairEntry> Trainer::next_batch() {
  std::vector<data::PairEntry> batch;
  while (static_cast<int>(batch.size()) < batch_size_) {
    if (cursor_ == order_.size()) {
      for (int i = static_cast<int>(order_.size()) - 1; i > 0; --i) {
        std::swap(order_[i], order_[order_rng_.uniform_int(0, i)]);
      }
      cursor_ = 0;
    }
    batch.push_back(train_pairs_[order_[cursor_++]]);
  }
  return batch;
}

TraceRow Trainer::step() {
  ++iter_;
  const std::vector<data::PairEntry> batch = next_batch();
  const int n = static_cast<int>(batch.size());
  const double w = 1.0 / n;
  const Model& m = model_;

  struct Work {
    PersonSample sample;
    std::unique_ptr<Tape> tape;
    std::unique_ptr<ParamBinding> gen_bind;
    nets::GeneratorOutput out;
    std::vector<Tensor> grads;
    double d_loss = 0.0;
    std::array<double, 5> terms{};
    double total = 0.0;
  };
  std::vector<Work> work(n);

  // Discriminator step. The generator graph stays on its tape for reuse.
  parallel_for(n, threads_, [&](int b) {
    Work& wk = work[b];
    wk.sample = source_.sample(batch[b]);
    wk.tape = std::make_unique<Tape>();
    wk.gen_bind = std::make_unique<ParamBinding>(*wk.tape, m.gen_store, true);
    wk.out = nets::generate(*wk.gen_bind, m.gen, wk.sample);

    Tape dt;
    ParamBinding db(dt, m.disc_store, true);
    const auto real = nets::discriminate(db, m.disc, dt.constant(wk.sample.tgt_image));
    const auto fake = nets::discriminate(db, m.disc, dt.constant(wk.out.image.value()));
    const Var loss = losses::adv_loss_d(real, fake);
    wk.d_loss = loss.value()[0];
    if (!std::isfinite(wk.d_loss)) {
      throw NumericError("discriminator loss is not finite at iteration " + std::to_string(iter_) +
                         " (pair " + wk.sample.ref_stem + " -> " + wk.sample.tgt_stem + ")");
    }
    backward(dt, loss);
    wk.grads = m.disc_store.zeros_like();
    db.accumulate_grads(wk.grads, w);
  });
  std::vector<Tensor> disc_grads = m.disc_store.zeros_like();
  for (Work& wk : work) add_into(disc_grads, wk.grads);
  adam_step(model_.disc_store, disc_grads, disc_adam_);

  // Generator step against the updated discriminator.
  parallel_for(n, threads_, [&](int b) {
    Work& wk = work[b];
    Tape& tape = *wk.tape;
    ParamBinding db(tape, m.disc_store, false);
    const Var target = tape.constant(wk.sample.tgt_image);
    const Var img = wk.out.image;
    losses::LossTerms terms;
    terms.l1 = losses::l1_loss(img, target);
    terms.adv = losses::adv_loss_g(nets::discriminate(db, m.disc, img));
    terms.per = losses::perceptual_loss(frozen_, img, target);
    terms.style = losses::style_loss(frozen_, img, target);
    terms.par = losses::partial_loss(frozen_, img, target, wk.sample.tgt_masks, partial_);
    Var total;
    try {
      total = losses::total_loss(terms, weights_);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at iteration " + std::to_string(iter_) +
                         " (pair " + wk.sample.ref_stem + " -> " + wk.sample.tgt_stem + ")");
    }
    const Var* parts[] = {&terms.l1, &terms.adv, &terms.per, &terms.style, &terms.par};
    for (int k = 0; k < 5; ++k) wk.terms[k] = parts[k]->value()[0];
    wk.total = total.value()[0];
    backward(tape, total);
    wk.grads = m.gen_store.zeros_like();
    wk.gen_bind->accumulate_grads(wk.grads, w);
    wk.gen_bind.reset();
    wk.tape.reset();
  });
  std::vector<Tensor> gen_grads = m.gen_store.zeros_like();
  for (Work& wk : work) add_into(gen_grads, wk.grads);
  adam_step(model_.gen_store, gen_grads, gen_adam_);

  TraceRow row;
  row.iter = iter_;
  for (const Work& wk : work) {
    row.d_loss += w * wk.d_loss;
    for (int k = 0; k < 5; ++k) row.terms[k] += w * wk.terms[k];
    row.total += w * wk.total;
  }
  return row;
}

std::vector<TraceRow> run_training(const Config& cfg, const data::Dataset& ds,
                                   const std::filesystem::path& out_dir, std::ostream& log) {
  const long iters = cfg.get_int("train.iters");
  const long trace_every = cfg.get_int("train.trace_every");
  const long ckpt_every = cfg.get_int("train.checkpoint_every");
  if (iters < 1 || trace_every < 1 || ckpt_every < 1) {
    throw UsageError("train.iters, train.trace_every and train.checkpoint_every must be positive");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError(out_dir.string() + ": cannot create directory (" + ec.message() + ")");

  log << "# resolved config (" << cfg.hash() << ")\n" << cfg.resolved();
  std::ofstream(out_dir / "config.txt") << cfg.resolved();

  Trainer trainer(cfg, ds);
  log << "# " << trainer.model().gen_store.scalar_count() << " generator and "
      << trainer.model().disc_store.scalar_count() << " discriminator parameters, "
      << trainer.threads() << " thread(s)\n";

  std::ofstream trace(out_dir / "trace.tsv");
  if (!trace) throw DataError((out_dir / "trace.tsv").string() + ": cannot open for writing");
  std::string header = "iter\td_loss";
  for (const char* t : losses::kTermNames) header += std::string("\t") + t;
  trace << header << "\ttotal\n";

  std::vector<TraceRow> rows;
  for (long i = 1; i <= iters; ++i) {
    rows.push_back(trainer.step());
    if (i % trace_every == 0) {
      const std::string line = trace_line(rows.back());
      trace << line << std::flush;
      log << line << std::flush;
    }
    if (i % ckpt_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "ckpt_%06ld.pdgn", i);
      save_checkpoint(out_dir / name, trainer.model().checkpoint());
    }
  }
  save_checkpoint(out_dir / "final.pdgn", trainer.model().checkpoint());
  return rows;
}

Tensor generate_image(const Model& model, const PersonSample& sample) {
  Tape tape;
  ParamBinding bind(tape, model.gen_store, false);
  return nets::generate(bind, model.gen, sample).image.value();
}

}  // namespace pdgan::app
