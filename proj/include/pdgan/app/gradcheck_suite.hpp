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

#include <cstdint>
#include <string>
#include <vector>

#include "pdgan/gradcheck.hpp"

namespace pdgan::app {

inline constexpr double kGradTolerance = 1e-4;
inline constexpr double kGradEps = 1e-6;
inline constexpr const char* kGradModules[] = {"tensor", "fourier",  "attention",
                                               "parts",  "networks", "losses"};

struct GradCheckEntry {
  std::string module;
  std::string op;
  GradCheckResult result;
  bool passed() const { return result.max_rel_error < kGradTolerance; }
};

/// Central-difference checks of every differentiable op in a module
/// ("all" runs every module), in a fixed order. Throws UsageError for an
/// unknown module name.
std::vector<GradCheckEntry> run_gradchecks(const std::string& module, std::uint64_t seed);

}  // namespace pdgan::app
