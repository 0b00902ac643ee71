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

#include <CLI11.hpp>

#include <iostream>

#include "pdgan/app/commands.hpp"
#include "pdgan/errors.hpp"

using namespace pdgan::app;

int main(int argc, char** argv) {
  CLI::App app{"Pose-guided person image generation toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth-data", "Render a synthetic paired-pose dataset");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--identities", synth.identities, "Number of identities");
  synth_cmd->add_option("--poses", synth.poses, "Poses per identity");
  synth_cmd->add_option("--seed", synth.seed, "Random seed");
  synth_cmd->add_option("--height", synth.height, "Image height");
  synth_cmd->add_option("--width", synth.width, "Image width");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train generator and discriminator");
  train_cmd->add_option("--data", train.data, "Dataset directory")->required();
  train_cmd->add_option("--config", train.config, "Config file (key = value)");
  train_cmd->add_option("--set", train.overrides, "Override a config key: key=value");
  train_cmd->add_option("--out", train.out, "Run directory")->required();

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "Generate target-pose images from a checkpoint");
  gen_cmd->add_option("--ckpt", gen.ckpt, "Checkpoint file")->required();
  gen_cmd->add_option("--data", gen.data, "Dataset directory")->required();
  gen_cmd->add_option("--pairs", gen.pairs, "train, test, all, or a file of 'ref tgt' lines");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "PSNR, FID and perceptual distance");
  eval_cmd->add_option("--gen", eval.gen, "Generated images")->required();
  eval_cmd->add_option("--truth", eval.truth, "Ground-truth images or dataset directory")->required();
  eval_cmd->add_option("--out", eval.out, "Report file");

  GradcheckArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare gradients with central differences");
  grad_cmd->add_option("--module", grad.module, "tensor, fourier, attention, parts, networks, losses or all");
  grad_cmd->add_option("--seed", grad.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) cmd_synth_data(synth, std::cout);
    if (train_cmd->parsed()) cmd_train(train, std::cout);
    if (gen_cmd->parsed()) cmd_generate(gen, std::cout);
    if (eval_cmd->parsed()) cmd_evaluate(eval, std::cout);
    if (grad_cmd->parsed() && !cmd_gradcheck(grad, std::cout)) return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitOk;
}
