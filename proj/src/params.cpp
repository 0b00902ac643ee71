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

#include "pdgan/params.hpp"

#include <cmath>

#include "pdgan/errors.hpp"

namespace pdgan {

ParamId ParamStore::add(std::string name, Tensor value) {
  if (index_.contains(name)) throw Error("duplicate parameter name '" + name + "'");
  const int i = static_cast<int>(values_.size());
  index_.emplace(name, i);
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return ParamId{i};
}

ParamId ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter '" + name + "'");
  return ParamId{it->second};
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const Tensor& t : values_) n += t.size();
  return n;
}

std::vector<Tensor> ParamStore::zeros_like() const {
  std::vector<Tensor> out;
  out.reserve(values_.size());
  for (const Tensor& t : values_) out.emplace_back(t.shape());
  return out;
}

std::size_t count_params(const ParamStore& store) { return store.scalar_count(); }

ParamId add_conv_weight(ParamStore& store, const std::string& name, int c_out, int c_in, int k,
                        Rng& rng) {
  const double stddev = std::sqrt(2.0 / (c_in * k * k));
  return store.add(name, rng.normal_tensor({c_out, c_in, k, k}, stddev));
}

ParamId add_dense_weight(ParamStore& store, const std::string& name, int rows, int cols,
                         double stddev, Rng& rng) {
  return store.add(name, rng.normal_tensor({rows, cols}, stddev));
}

ParamId add_filled(ParamStore& store, const std::string& name, Shape shape, double v) {
  return store.add(name, Tensor(std::move(shape), v));
}

ParamBinding::ParamBinding(Tape& tape, const ParamStore& store, bool trainable)
    : tape_(&tape), store_(&store), trainable_(trainable), bound_(store.size()) {}

Var ParamBinding::operator()(ParamId id) {
  if (!id.valid() || static_cast<std::size_t>(id.index) >= bound_.size()) {
    throw Error("parameter id out of range");
  }
  Var& slot = bound_[id.index];
  if (!slot.valid()) slot = tape_->leaf(store_->value(id), trainable_);
  return slot;
}

void ParamBinding::set_override(ParamId id, Var v) {
  if (v.shape() != store_->value(id).shape()) {
    throw ShapeError("override for '" + store_->name(id) + "' has shape " + shape_str(v.shape()));
  }
  bound_.at(id.index) = v;
}

void ParamBinding::accumulate_grads(std::vector<Tensor>& into, double weight) const {
  if (into.size() != bound_.size()) throw ShapeError("gradient buffer count mismatch");
  for (std::size_t i = 0; i < bound_.size(); ++i) {
    if (!bound_[i].valid()) continue;
    const Tensor* g = tape_->grad(bound_[i]);
    if (!g) continue;
    Tensor& dst = into[i];
    for (std::size_t j = 0; j < g->size(); ++j) dst[j] += weight * (*g)[j];
  }
}

}  // namespace pdgan
