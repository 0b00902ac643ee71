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

#include "pdgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pdgan/errors.hpp"

namespace pdgan {
namespace {

double evaluate(const ScalarFunction& f, const Tensor& x) {
  Tape tape;
  Var out = f(tape, tape.leaf(x, false));
  if (out.size() != 1) throw ShapeError("grad_check function must be scalar-valued");
  return out.value()[0];
}

}  // namespace

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

GradCheckResult grad_check(const ScalarFunction& f, const Tensor& x, double eps) {
  std::vector<std::size_t> all(x.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return grad_check(f, x, eps, all);
}

GradCheckResult grad_check(const ScalarFunction& f, const Tensor& x, double eps,
                           std::span<const std::size_t> coords) {
  Tape tape;
  Var leaf = tape.leaf(x, true);
  Var out = f(tape, leaf);
  backward(tape, out);
  const Tensor analytic = tape.grad_or_zero(leaf);

  GradCheckResult r;
  Tensor probe = x;
  for (std::size_t i : coords) {
    if (i >= x.size()) throw ShapeError("grad_check coordinate out of range");
    probe[i] = x[i] + eps;
    const double up = evaluate(f, probe);
    probe[i] = x[i] - eps;
    const double down = evaluate(f, probe);
    probe[i] = x[i];
    const double numeric = (up - down) / (2.0 * eps);
    const double err = relative_error(analytic[i], numeric);
    if (r.coords_checked == 0 || err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst_index = i;
      r.analytic_at_worst = analytic[i];
      r.numeric_at_worst = numeric;
    }
    ++r.coords_checked;
  }
  return r;
}

GradCheckResult grad_check_param(const ParamFunction& f, const ParamStore& store, ParamId id,
                                 double eps, std::span<const std::size_t> coords) {
  ScalarFunction wrapped = [&](Tape& tape, const Var& x) {
    ParamBinding binding(tape, store, false);
    binding.set_override(id, x);
    return f(binding);
  };
  return grad_check(wrapped, store.value(id), eps, coords);
}

}  // namespace pdgan
