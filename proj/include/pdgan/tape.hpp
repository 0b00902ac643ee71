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

#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

#include "pdgan/tensor.hpp"

namespace pdgan {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while
/// its tape is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  int dim(int axis) const { return value().dim(axis); }
  std::size_t size() const { return value().size(); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Receives the gradient and value of the node's output and pushes adjoints
/// into the node's inputs through Tape::grad_sink.
using BackwardFn =
    std::function<void(Tape&, const Tensor& out_grad, const Tensor& out_value)>;

/// Reverse-mode tape. Nodes are appended in evaluation order, so every
/// operand of node k has an index below k.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Records an op output. The backward rule is only kept when at least one
  // input requires a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

  const Tensor& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<int>& inputs(int id) const { return nodes_[id].inputs; }

  // Accumulated gradient of a node, or nullptr if nothing reached it.
  const Tensor* grad(const Var& v) const;
  // Gradient of v, zeros if nothing reached it.
  Tensor grad_or_zero(const Var& v) const;

  // Accumulator for v's gradient, allocated on first use; nullptr when v
  // does not require a gradient.
  Tensor* grad_sink(const Var& v);

  void zero_grad();

 private:
  friend struct BackwardStats backward(Tape& tape, const Var& loss);
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::vector<int> inputs;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;
};

struct BackwardStats {
  std::size_t nodes_visited = 0;
};

/// Seeds d(loss)/d(loss) = 1 and runs every recorded backward rule once in
/// reverse order. Gradients accumulate; call Tape::zero_grad between passes.
BackwardStats backward(Tape& tape, const Var& loss);

}  // namespace pdgan
