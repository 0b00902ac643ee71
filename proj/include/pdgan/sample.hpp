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

#include <string>

#include "pdgan/body_parts.hpp"
#include "pdgan/tensor.hpp"

namespace pdgan {

/// One reference/target pair with everything the generator and losses read.
struct PersonSample {
  Tensor ref_image;  // 3×H×W in [0,1]
  Tensor tgt_image;  // 3×H×W
  Tensor ref_pose;   // K×H×W heatmaps
  Tensor tgt_pose;   // K×H×W
  parts::PartMaskSet ref_masks;
  parts::PartMaskSet tgt_masks;
  int identity = 0;
  int ref_pose_id = 0;
  int tgt_pose_id = 0;
  std::string ref_stem;
  std::string tgt_stem;

  int height() const { return ref_image.dim(1); }
  int width() const { return ref_image.dim(2); }
  int keypoints() const { return ref_pose.dim(0); }
};

}  // namespace pdgan
