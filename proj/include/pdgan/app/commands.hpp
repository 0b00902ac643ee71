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
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pdgan/app/trainer.hpp"
#include "pdgan/metrics.hpp"

namespace pdgan::app {

namespace fs = std::filesystem;

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitChecksum = 4;

/// Maps an exception escaping a command onto an exit code.
int exit_code_for(const std::exception& e);

struct SynthArgs {
  fs::path out;
  int identities = 30;
  int poses = 4;
  std::uint64_t seed = 0;
  int height = 64;
  int width = 48;
};
void cmd_synth_data(const SynthArgs& args, std::ostream& log);

struct TrainArgs {
  fs::path data;
  fs::path config;                     // empty: defaults only
  std::vector<std::string> overrides;  // "key=value", applied after the file
  fs::path out;
};
/// Returns the trace row of every iteration, not only the logged ones.
std::vector<TraceRow> cmd_train(const TrainArgs& args, std::ostream& log);

struct GenerateArgs {
  fs::path ckpt;
  fs::path data;
  std::string pairs = "test";  // train, test, all, or a file of "ref tgt" lines
  fs::path out;
};
/// Writes <ref>_<tgt>.gen.ppm per pair; returns the number written.
std::size_t cmd_generate(const GenerateArgs& args, std::ostream& log);

struct EvaluateArgs {
  fs::path gen;
  fs::path truth;
  fs::path out;
};
metrics::MetricReport cmd_evaluate(const EvaluateArgs& args, std::ostream& log);

struct GradcheckArgs {
  std::string module = "all";
  std::uint64_t seed = 0;
};
/// Prints one line per op; returns true when every error is below tolerance.
bool cmd_gradcheck(const GradcheckArgs& args, std::ostream& log);

/// Key-value report text as written by cmd_evaluate.
std::string format_report(const metrics::MetricReport& report);

}  // namespace pdgan::app
