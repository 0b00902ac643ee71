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

#include "pdgan/data.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "pdgan/errors.hpp"

namespace pdgan::data {
namespace {

using parts::Part;

FigureSpec neutral_spec() {
  FigureSpec spec;
  for (int p = 0; p < parts::kPartCount; ++p) {
    spec.colors[p] = {static_cast<std::uint8_t>(20 * p + 10), static_cast<std::uint8_t>(200 - 15 * p),
                      static_cast<std::uint8_t>(90 + 7 * p)};
  }
  return spec;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pdgan_data_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(RenderFigure, MasksPartitionAndBackgroundCount) {
  for (bool dress : {false, true}) {
    FigureSpec spec = neutral_spec();
    spec.dress = dress;
    const Render r = render_figure(spec);
    const int h = spec.height, w = spec.width;
    const std::vector<std::uint8_t> labels = r.masks.labels();
    std::size_t figure = 0;
    for (std::uint8_t l : labels) figure += l != static_cast<int>(Part::kBackground);
    EXPECT_EQ(r.masks.pixel_count(static_cast<int>(Part::kBackground)),
              static_cast<std::size_t>(h * w) - figure);
    std::size_t total = 0;
    for (int p = 0; p < parts::kPartCount; ++p) total += r.masks.pixel_count(p);
    EXPECT_EQ(total, static_cast<std::size_t>(h * w));
    EXPECT_NO_THROW(parts::validate_partition(r.masks.masks()));
    EXPECT_GT(figure, 300u);
    // Dress figures have no pants or upper clothes and vice versa.
    const bool has_dress = r.masks.pixel_count(static_cast<int>(Part::kDress)) > 0;
    const bool has_pants = r.masks.pixel_count(static_cast<int>(Part::kPants)) > 0;
    EXPECT_EQ(has_dress, dress);
    EXPECT_EQ(has_pants, !dress);
    for (int p : {static_cast<int>(Part::kHair), static_cast<int>(Part::kFace),
                  static_cast<int>(Part::kUpperSkin), static_cast<int>(Part::kLeg)}) {
      EXPECT_GT(r.masks.pixel_count(p), 0u) << parts::kPartNames[p];
    }
  }
}

TEST(RenderFigure, ImageColorsFollowLabels) {
  const FigureSpec spec = neutral_spec();
  const Render r = render_figure(spec);
  const std::vector<std::uint8_t> labels = r.masks.labels();
  const int hw = spec.height * spec.width;
  for (int c = 0; c < 3; ++c)
    for (int p = 0; p < hw; ++p) ASSERT_EQ(r.image[c * hw + p], spec.colors[labels[p]][c] / 255.0);
}

TEST(RenderFigure, Deterministic) {
  FigureSpec spec = neutral_spec();
  spec.angles.elbow[1] = 0.7;
  const Render a = render_figure(spec);
  const Render b = render_figure(spec);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.masks, b.masks);
  EXPECT_EQ(a.keypoints, b.keypoints);
}

TEST(RenderFigure, ElbowRotationOnlyMovesForearm) {
  FigureSpec spec = neutral_spec();
  spec.angles.shoulder[0] = 0.8;
  const Render before = render_figure(spec);
  spec.angles.elbow[0] = -0.9;
  const Render after = render_figure(spec);

  // Oracle: every changed pixel lies inside the left forearm capsule of one
  // of the two poses, and carries the forearm label in that pose.
  const double r = 0.8 * spec.arm_width;
  auto in_forearm = [&](const Render& rd, int i, int j) {
    const double ax = rd.keypoints.at(4, 0), ay = rd.keypoints.at(4, 1);
    const double bx = rd.keypoints.at(6, 0), by = rd.keypoints.at(6, 1);
    const double dx = bx - ax, dy = by - ay;
    const double t = std::clamp(((j - ax) * dx + (i - ay) * dy) / (dx * dx + dy * dy), 0.0, 1.0);
    return std::hypot(j - (ax + t * dx), i - (ay + t * dy)) <= r;
  };
  const auto la = before.masks.labels(), lb = after.masks.labels();
  const auto upper_skin = static_cast<std::uint8_t>(Part::kUpperSkin);
  int changed = 0;
  for (int i = 0; i < spec.height; ++i)
    for (int j = 0; j < spec.width; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * spec.width + j;
      if (la[k] == lb[k]) continue;
      ++changed;
      const bool was = la[k] == upper_skin && in_forearm(before, i, j);
      const bool now = lb[k] == upper_skin && in_forearm(after, i, j);
      EXPECT_TRUE(was || now) << "pixel (" << i << ", " << j << ")";
    }
  EXPECT_GT(changed, 10);
  for (int kp = 0; kp < kKeypoints; ++kp) {
    if (kp == 6) continue;
    EXPECT_EQ(before.keypoints.at(kp, 0), after.keypoints.at(kp, 0)) << kKeypointNames[kp];
    EXPECT_EQ(before.keypoints.at(kp, 1), after.keypoints.at(kp, 1)) << kKeypointNames[kp];
  }
}

TEST(RenderFigure, OffCanvasThrows) {
  FigureSpec spec = neutral_spec();
  spec.angles.shoulder[1] = 1.57;
  spec.angles.elbow[1] = 0.0;
  spec.width = 24;
  spec.height = 64;
  EXPECT_THROW(render_figure(spec), DataError);
}

TEST(RenderFigure, KeypointNamesAndCount) {
  const Render r = render_figure(neutral_spec());
  EXPECT_EQ(r.keypoints.shape(), (Shape{kKeypoints, 2}));
  EXPECT_STREQ(kKeypointNames[0], "head");
  EXPECT_STREQ(kKeypointNames[9], "r_foot");
  // Feet sit below hands, which sit below the neck.
  EXPECT_GT(r.keypoints.at(8, 1), r.keypoints.at(6, 1));
  EXPECT_GT(r.keypoints.at(6, 1), r.keypoints.at(1, 1));
  EXPECT_LT(r.keypoints.at(0, 1), r.keypoints.at(1, 1));
}

TEST(PoseHeatmaps, PeakFarFieldAndArgmax) {
  const double sigma = 1.5;
  const Tensor kp = Tensor::from_rows({{10.0, 20.0}, {3.4, 7.6}, {40.2, 55.0}});
  const Heatmaps hm = pose_to_heatmaps(kp, 64, 48, sigma);
  EXPECT_DOUBLE_EQ(hm.maps.at(0, 20, 10), 1.0);
  for (int c = 0; c < 3; ++c) {
    EXPECT_FALSE(hm.off_canvas[c]);
    int best_i = -1, best_j = -1;
    double best = -1.0;
    for (int i = 0; i < 64; ++i)
      for (int j = 0; j < 48; ++j) {
        const double v = hm.maps.at(c, i, j);
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
        if (v > best) best = v, best_i = i, best_j = j;
        if (std::hypot(i - kp.at(c, 1), j - kp.at(c, 0)) > 8 * sigma + 1.0) {
          ASSERT_LT(v, 1e-6);
        }
      }
    EXPECT_EQ(best_j, std::lround(kp.at(c, 0)));
    EXPECT_EQ(best_i, std::lround(kp.at(c, 1)));
    EXPECT_DOUBLE_EQ(best, 1.0);
  }
}

TEST(PoseHeatmaps, OffCanvasChannelIsZeroAndFlagged) {
  const Tensor kp = Tensor::from_rows({{-5.0, 3.0}, {4.0, 4.0}});
  const Heatmaps hm = pose_to_heatmaps(kp, 16, 16);
  EXPECT_TRUE(hm.off_canvas[0]);
  EXPECT_FALSE(hm.off_canvas[1]);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) EXPECT_EQ(hm.maps.at(0, i, j), 0.0);
}

TEST(PoseHeatmaps, RejectsBadSigma) {
  EXPECT_THROW(pose_to_heatmaps(Tensor({1, 2}), 8, 8, 0.0), UsageError);
}

TEST(MakeDataset, OneIdentityTwoPoses) {
  const Dataset ds = make_dataset(1, 2, 5);
  ASSERT_EQ(ds.frames.size(), 2u);
  ASSERT_EQ(ds.pairs.size(), 2u);
  EXPECT_EQ(ds.pairs[0].ref, 0);
  EXPECT_EQ(ds.pairs[0].tgt, 1);
  EXPECT_EQ(ds.pairs[1].ref, 1);
  EXPECT_EQ(ds.pairs[1].tgt, 0);
  EXPECT_EQ(ds.frames[1].stem, "0000_01");
}

TEST(MakeDataset, DeskSetSizesAndDisjointSplits) {
  const Dataset ds = make_dataset(30, 4, 2026);
  EXPECT_EQ(ds.frames.size(), 120u);
  EXPECT_EQ(ds.pairs.size(), 360u);
  std::set<int> train_ids, test_ids;
  for (const PairEntry& p : ds.pairs) {
    EXPECT_EQ(ds.frames[p.ref].identity, ds.frames[p.tgt].identity);
    EXPECT_NE(p.ref, p.tgt);
    (p.split == "train" ? train_ids : test_ids).insert(ds.frames[p.ref].identity);
  }
  EXPECT_EQ(test_ids.size(), 3u);
  EXPECT_EQ(train_ids.size(), 27u);
  for (int id : test_ids) EXPECT_EQ(train_ids.count(id), 0u);
  EXPECT_EQ(ds.split("test").size(), 36u);
  for (const Frame& f : ds.frames) ASSERT_NO_THROW(parts::validate_partition(f.masks.masks()));
}

TEST(MakeDataset, SameSeedSameBytes) {
  const auto a = scratch_dir("seed_a"), b = scratch_dir("seed_b");
  save_dataset(make_dataset(3, 3, 11), a);
  save_dataset(make_dataset(3, 3, 11), b);
  int files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(a)) {
    ++files;
    EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path();
  }
  EXPECT_EQ(files, 3 * 3 * 3 + 1);
  const Dataset other = make_dataset(3, 3, 12);
  EXPECT_NE(other.frames[0].image, make_dataset(3, 3, 11).frames[0].image);
}

TEST(MakeDataset, SamplesShareIdentityColors) {
  const Dataset ds = make_dataset(2, 2, 3);
  const PersonSample s = make_sample(ds, ds.pairs[0]);
  EXPECT_EQ(s.ref_pose.shape(), (Shape{kKeypoints, 64, 48}));
  EXPECT_EQ(s.identity, 0);
  EXPECT_EQ(s.ref_stem, "0000_00");
  EXPECT_EQ(s.tgt_stem, "0000_01");
  // Each part present in both frames has the same color in both images.
  const auto lr = s.ref_masks.labels(), lt = s.tgt_masks.labels();
  const int hw = 64 * 48;
  std::array<double, parts::kPartCount> red{};
  red.fill(-1.0);
  for (int p = 0; p < hw; ++p) red[lr[p]] = s.ref_image[p];
  for (int p = 0; p < hw; ++p) {
    if (red[lt[p]] >= 0.0) {
      ASSERT_EQ(s.tgt_image[p], red[lt[p]]);
    }
  }
}

TEST(DatasetIo, RoundTrip) {
  const Dataset ds = make_dataset(2, 3, 9);
  const auto dir = scratch_dir("roundtrip");
  save_dataset(ds, dir);
  const Dataset back = load_dataset(dir);
  ASSERT_EQ(back.frames.size(), ds.frames.size());
  ASSERT_EQ(back.pairs.size(), ds.pairs.size());
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    const Frame& a = ds.frames[ds.pairs[i].ref];
    const Frame& b = back.frames[back.pairs[i].ref];
    EXPECT_EQ(a.stem, b.stem);
    EXPECT_EQ(a.masks, b.masks);
    EXPECT_EQ(a.keypoints, b.keypoints);
    // Rendered colors are multiples of 1/255, so 8-bit storage is exact.
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.identity, b.identity);
    EXPECT_EQ(a.pose, b.pose);
    EXPECT_EQ(ds.pairs[i].split, back.pairs[i].split);
  }
}

TEST(DatasetIo, PpmQuantizesToEightBits) {
  const auto dir = scratch_dir("ppm");
  std::filesystem::create_directories(dir);
  Rng rng(4);
  const Tensor img = rng.uniform_tensor({3, 5, 7}, 0.0, 1.0);
  write_ppm(dir / "x.ppm", img);
  const Tensor back = read_ppm(dir / "x.ppm");
  EXPECT_LE(max_abs_diff(img, back), 0.5 / 255.0 + 1e-12);
}

TEST(DatasetIo, MissingMaskNamesFile) {
  const auto dir = scratch_dir("missing");
  save_dataset(make_dataset(1, 2, 1), dir);
  std::filesystem::remove(dir / "0000_01.mask.pgm");
  try {
    load_dataset(dir);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("0000_01.mask.pgm"), std::string::npos) << e.what();
  }
}

TEST(DatasetIo, RejectsInvalidMaskLabel) {
  const auto dir = scratch_dir("badmask");
  save_dataset(make_dataset(1, 2, 1), dir);
  const auto path = dir / "0000_00.mask.pgm";
  std::string bytes = slurp(path);
  bytes.back() = 9;
  std::ofstream(path, std::ios::binary) << bytes;
  try {
    load_dataset(dir);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("0000_00.mask.pgm"), std::string::npos) << e.what();
  }
}

TEST(DatasetIo, RejectsMalformedPairsLine) {
  const auto dir = scratch_dir("badpairs");
  save_dataset(make_dataset(1, 2, 1), dir);
  std::ofstream(dir / "pairs.txt") << "0000_00 0000_01 validation\n";
  EXPECT_THROW(load_dataset(dir), DataError);
}

TEST(DatasetIo, KeypointsCarryTheirOwnCount) {
  const auto dir = scratch_dir("kp");
  std::filesystem::create_directories(dir);
  Tensor kp({18, 2});
  for (int i = 0; i < 18; ++i) kp.at(i, 0) = i / 3.0, kp.at(i, 1) = 0.1 * i;
  write_keypoints(dir / "a.kp.txt", kp);
  EXPECT_EQ(read_keypoints(dir / "a.kp.txt"), kp);
}

}  // namespace
}  // namespace pdgan::data
