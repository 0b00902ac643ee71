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
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pdgan/body_parts.hpp"
#include "pdgan/rng.hpp"
#include "pdgan/sample.hpp"

namespace pdgan::data {

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr int kKeypoints = 10;
inline constexpr std::array<const char*, kKeypoints> kKeypointNames = {
    "head",    "neck",    "l_shoulder", "r_shoulder", "l_elbow",
    "r_elbow", "l_hand",  "r_hand",     "l_foot",     "r_foot"};

/// Joint angles in radians. Limb angles are measured from straight down;
/// positive values swing the limb away from the body midline.
struct Angles {
  double neck = 0.0;
  double shoulder[2] = {0.35, 0.35};  // left, right
  double elbow[2] = {0.0, 0.0};       // relative to the upper arm
  double hip[2] = {0.1, 0.1};
  double knee[2] = {0.0, 0.0};        // relative to the thigh
};

struct FigureSpec {
  int height = 64;
  int width = 48;
  Angles angles;
  bool dress = false;
  std::array<Rgb, parts::kPartCount> colors{};  // indexed by canonical part
  double arm_width = 2.0;                       // capsule radii at 64×48
  double leg_width = 2.5;
};

struct Render {
  Tensor image;  // 3×H×W, values k/255
  parts::PartMaskSet masks;
  Tensor keypoints;  // K×2 as (x, y); pixel (i, j) has its center at (j, i)
};

/// Deterministic rasterization. Throws DataError if any part of the figure
/// leaves the canvas.
Render render_figure(const FigureSpec& spec);

struct Heatmaps {
  Tensor maps;                    // K×H×W
  std::vector<bool> off_canvas;  // channels left at zero
};

/// Per keypoint, exp(-d²/(2σ²)) around the nearest pixel center, so the
/// peak is exactly 1 there.
Heatmaps pose_to_heatmaps(const Tensor& keypoints, int height, int width, double sigma = 1.5);

struct Frame {
  std::string stem;  // <id>_<pose>, e.g. 0007_02
  int identity = 0;
  int pose = 0;
  Tensor image;
  parts::PartMaskSet masks;
  Tensor keypoints;
};

struct PairEntry {
  int ref = 0;  // indexes into Dataset::frames
  int tgt = 0;
  std::string split;  // "train" or "test"
};

struct Dataset {
  std::vector<Frame> frames;
  std::vector<PairEntry> pairs;

  int height() const { return frames.at(0).image.dim(1); }
  int width() const { return frames.at(0).image.dim(2); }
  std::vector<PairEntry> split(const std::string& name) const;
};

std::string make_stem(int identity, int pose);

/// Random identities (colors, dress or not) each rendered in
/// poses_per_identity random poses; every ordered pose pair becomes an entry.
/// round(0.1·n) identities, chosen by the seed, are held out as the test split.
Dataset make_dataset(int n_identities, int poses_per_identity, std::uint64_t seed, int height = 64,
                     int width = 48);

PersonSample make_sample(const Dataset& ds, const PairEntry& pair, double sigma = 1.5);

void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

// Single-file formats, also used by the CLI.
void write_ppm(const std::filesystem::path& path, const Tensor& image);  // clamps, rounds
Tensor read_ppm(const std::filesystem::path& path);
void write_mask_pgm(const std::filesystem::path& path, const parts::PartMaskSet& masks);
parts::PartMaskSet read_mask_pgm(const std::filesystem::path& path);
void write_keypoints(const std::filesystem::path& path, const Tensor& keypoints);
Tensor read_keypoints(const std::filesystem::path& path);

}  // namespace pdgan::data
