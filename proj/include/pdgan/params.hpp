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

#include <compare>
#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "pdgan/rng.hpp"
#include "pdgan/tape.hpp"

namespace pdgan {

struct ParamId {
  int index = -1;
  bool valid() const { return index >= 0; }
  auto operator<=>(const ParamId&) const = default;
};

/// Ordered, named collection of learnable tensors. Insertion order is the
/// canonical order used for checkpoints and gradient buffers.
class ParamStore {
 public:
  ParamId add(std::string name, Tensor value);
  ParamId find(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.contains(name); }

  const Tensor& value(ParamId id) const { return values_.at(id.index); }
  Tensor& value(ParamId id) { return values_.at(id.index); }
  const std::string& name(ParamId id) const { return names_.at(id.index); }

  std::size_t size() const { return values_.size(); }
  ParamId id(std::size_t i) const { return ParamId{static_cast<int>(i)}; }
  std::size_t scalar_count() const;

  // Zero-filled buffers shaped like every parameter, in store order.
  std::vector<Tensor> zeros_like() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::unordered_map<std::string, int> index_;
};

/// Exact number of learnable scalars.
std::size_t count_params(const ParamStore& store);

// Initializers. Convolution and dense weights use He-normal scaling.
ParamId add_conv_weight(ParamStore& store, const std::string& name, int c_out, int c_in,
                        int k, Rng& rng);
ParamId add_dense_weight(ParamStore& store, const std::string& name, int rows, int cols,
                         double stddev, Rng& rng);
ParamId add_filled(ParamStore& store, const std::string& name, Shape shape, double v);

/// Binds store parameters to leaves of one tape, lazily. A bound parameter is
/// a single leaf no matter how many times it is used, so fan-out gradients
/// accumulate on it.
class ParamBinding {
 public:
  ParamBinding(Tape& tape, const ParamStore& store, bool trainable);

  Tape& tape() const { return *tape_; }
  const ParamStore& store() const { return *store_; }
  bool trainable() const { return trainable_; }

  Var operator()(ParamId id);
  // Substitutes a caller-owned tape value for a parameter (gradient checks).
  void set_override(ParamId id, Var v);

  // into[i] += weight * d(loss)/d(param i) for every bound parameter.
  void accumulate_grads(std::vector<Tensor>& into, double weight = 1.0) const;

 private:
  Tape* tape_;
  const ParamStore* store_;
  bool trainable_;
  std::vector<Var> bound_;
};

}  // namespace pdgan
