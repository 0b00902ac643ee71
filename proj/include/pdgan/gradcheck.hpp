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
#include <functional>
#include <span>

#include "pdgan/params.hpp"

namespace pdgan {

using ScalarFunction = std::function<Var(Tape&, const Var&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t coords_checked = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

/// |a - n| / max(1e-8, |a| + |n|)
double relative_error(double analytic, double numeric);

/// Compares tape gradients of the scalar f at x against central differences
/// (f(x + eps e) - f(x - eps e)) / (2 eps), over all coordinates or a subset.
GradCheckResult grad_check(const ScalarFunction& f, const Tensor& x, double eps = 1e-6);
GradCheckResult grad_check(const ScalarFunction& f, const Tensor& x, double eps,
                           std::span<const std::size_t> coords);

using ParamFunction = std::function<Var(ParamBinding&)>;

/// Same check with respect to one stored parameter; f builds its graph from a
/// binding in which that parameter is the perturbed leaf.
GradCheckResult grad_check_param(const ParamFunction& f, const ParamStore& store, ParamId id,
                                 double eps, std::span<const std::size_t> coords);

}  // namespace pdgan
