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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "pdgan/errors.hpp"

namespace pdgan::data {
namespace {

using parts::Part;

struct Point {
  double x = 0.0, y = 0.0;
};

Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }

// Unit vector for a limb angle; side -1 swings toward -x.
Point limb_dir(double angle, int side) { return {side * std::sin(angle), std::cos(angle)}; }

double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = p.x - (a.x + t * dx), ey = p.y - (a.y + t * dy);
  return std::sqrt(ex * ex + ey * ey);
}

// Horizontal band whose half-width varies linearly from top to bottom.
struct Trapezoid {
  double cx, y0, y1, half0, half1;
  bool contains(Point p) const {
    if (p.y < y0 || p.y > y1) return false;
    const double t = (p.y - y0) / (y1 - y0);
    return std::abs(p.x - cx) <= half0 + t * (half1 - half0);
  }
};

struct Capsule {
  Point a, b;
  double r;
  bool contains(Point p) const { return segment_distance(p, a, b) <= r; }
};

struct Skeleton {
  Point head, neck, shoulder[2], elbow[2], hand[2], hip[2], knee[2], foot[2];
  double head_r, hair_r;
  Point head_up;
};

Skeleton build_skeleton(const FigureSpec& spec) {
  const double s = std::min(spec.height / 64.0, spec.width / 48.0);
  const double cx = (spec.width - 1) / 2.0;
  const Angles& a = spec.angles;
  Skeleton k;
  k.neck = {cx, 15.0 * s};
  k.head_up = {std::sin(a.neck), -std::cos(a.neck)};
  k.head = k.neck + (6.0 * s) * k.head_up;
  k.head_r = 5.0 * s;
  k.hair_r = 5.8 * s;
  for (int side = 0; side < 2; ++side) {
    const int sign = side == 0 ? -1 : 1;
    k.shoulder[side] = {cx + sign * 6.5 * s, 17.5 * s};
    k.elbow[side] = k.shoulder[side] + (10.0 * s) * limb_dir(a.shoulder[side], sign);
    k.hand[side] = k.elbow[side] + (9.0 * s) * limb_dir(a.shoulder[side] + a.elbow[side], sign);
    k.hip[side] = {cx + sign * 3.5 * s, 34.0 * s};
    k.knee[side] = k.hip[side] + (12.0 * s) * limb_dir(a.hip[side], sign);
    k.foot[side] = k.knee[side] + (11.0 * s) * limb_dir(a.hip[side] + a.knee[side], sign);
  }
  return k;
}

void require_on_canvas(Point p, double r, const FigureSpec& spec, const char* what) {
  if (p.x - r < 0.0 || p.y - r < 0.0 || p.x + r > spec.width - 1.0 || p.y + r > spec.height - 1.0) {
    throw DataError(std::string("figure leaves the canvas at the ") + what);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(path.string() + ": write failed");
}

// Parses a binary PNM header; returns the payload offset.
std::size_t parse_pnm_header(const std::string& bytes, const std::filesystem::path& path,
                             const char* magic, int& w, int& h, int& maxval) {
  if (bytes.size() < 2 || bytes.compare(0, 2, magic) != 0) {
    throw DataError(path.string() + ": expected " + magic + " header");
  }
  std::size_t pos = 2;
  int fields[3];
  for (int& f : fields) {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    const char* begin = bytes.data() + pos;
    auto [ptr, ec] = std::from_chars(begin, bytes.data() + bytes.size(), f);
    if (ec != std::errc{} || ptr == begin) throw DataError(path.string() + ": malformed header");
    pos += static_cast<std::size_t>(ptr - begin);
  }
  w = fields[0];
  h = fields[1];
  maxval = fields[2];
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255) {
    throw DataError(path.string() + ": unsupported size or maxval");
  }
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw DataError(path.string() + ": malformed header");
  }
  return pos + 1;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Rgb random_rgb(Rng& rng, int lo, int hi) {
  return {static_cast<std::uint8_t>(rng.uniform_int(lo, hi)),
          static_cast<std::uint8_t>(rng.uniform_int(lo, hi)),
          static_cast<std::uint8_t>(rng.uniform_int(lo, hi))};
}

}  // namespace

Render render_figure(const FigureSpec& spec) {
  const int h = spec.height, w = spec.width;
  if (h < 16 || w < 12) throw DataError("canvas too small for a figure");
  const double s = std::min(h / 64.0, w / 48.0);
  const Skeleton k = build_skeleton(spec);
  const double arm_r = spec.arm_width * s, fore_r = 0.8 * spec.arm_width * s;
  const double thigh_r = spec.leg_width * s, shin_r = 0.8 * spec.leg_width * s;

  require_on_canvas(k.head, k.hair_r, spec, "head");
  for (int side = 0; side < 2; ++side) {
    require_on_canvas(k.elbow[side], arm_r, spec, "elbow");
    require_on_canvas(k.hand[side], fore_r, spec, "hand");
    require_on_canvas(k.knee[side], thigh_r, spec, "knee");
    require_on_canvas(k.foot[side], shin_r, spec, "foot");
  }

  const double cx = (w - 1) / 2.0;
  const Trapezoid torso{cx, 15.5 * s, 35.0 * s, 7.5 * s, 5.5 * s};
  const Trapezoid hips{cx, 31.0 * s, 37.0 * s, 5.5 * s, 6.0 * s};
  const Trapezoid skirt{cx, 30.0 * s, 46.0 * s, 5.5 * s, 9.5 * s};
  const auto top = static_cast<std::uint8_t>(spec.dress ? Part::kDress : Part::kUpperClothes);
  const auto sleeve = static_cast<std::uint8_t>(spec.dress ? Part::kUpperSkin : Part::kUpperClothes);

  std::vector<std::uint8_t> labels(static_cast<std::size_t>(h) * w,
                                   static_cast<std::uint8_t>(Part::kBackground));
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const Point p{static_cast<double>(j), static_cast<double>(i)};
      std::uint8_t& l = labels[static_cast<std::size_t>(i) * w + j];
      // Painter's order: legs, torso, arms, head.
      for (int side = 0; side < 2; ++side) {
        if (Capsule{k.knee[side], k.foot[side], shin_r}.contains(p)) l = static_cast<std::uint8_t>(Part::kLeg);
        if (Capsule{k.hip[side], k.knee[side], thigh_r}.contains(p)) {
          l = static_cast<std::uint8_t>(spec.dress ? Part::kLeg : Part::kPants);
        }
      }
      if (spec.dress) {
        if (skirt.contains(p)) l = static_cast<std::uint8_t>(Part::kDress);
      } else if (hips.contains(p)) {
        l = static_cast<std::uint8_t>(Part::kPants);
      }
      if (torso.contains(p)) l = top;
      for (int side = 0; side < 2; ++side) {
        if (Capsule{k.shoulder[side], k.elbow[side], arm_r}.contains(p)) l = sleeve;
        if (Capsule{k.elbow[side], k.hand[side], fore_r}.contains(p)) {
          l = static_cast<std::uint8_t>(Part::kUpperSkin);
        }
      }
      const double dx = p.x - k.head.x, dy = p.y - k.head.y;
      const double dist = std::sqrt(dx * dx + dy * dy);
      const double up = dx * k.head_up.x + dy * k.head_up.y;
      if (dist <= k.head_r) l = static_cast<std::uint8_t>(Part::kFace);
      if (dist <= k.hair_r && up > 0.2 * k.head_r) l = static_cast<std::uint8_t>(Part::kHair);
    }

  Render r;
  r.masks = parts::PartMaskSet::from_labels(labels, h, w);
  r.image = Tensor({3, h, w});
  for (int c = 0; c < 3; ++c)
    for (int p = 0; p < h * w; ++p) r.image[c * h * w + p] = spec.colors[labels[p]][c] / 255.0;
  const Point kp[kKeypoints] = {k.head,    k.neck,    k.shoulder[0], k.shoulder[1], k.elbow[0],
                                k.elbow[1], k.hand[0], k.hand[1],     k.foot[0],     k.foot[1]};
  r.keypoints = Tensor({kKeypoints, 2});
  for (int i = 0; i < kKeypoints; ++i) {
    r.keypoints.at(i, 0) = kp[i].x;
    r.keypoints.at(i, 1) = kp[i].y;
  }
  return r;
}

Heatmaps pose_to_heatmaps(const Tensor& keypoints, int height, int width, double sigma) {
  if (!(sigma > 0.0)) throw UsageError("heatmap sigma must be positive");
  if (keypoints.ndim() != 2 || keypoints.dim(1) != 2) {
    throw ShapeError("keypoints must be K×2, got " + shape_str(keypoints.shape()));
  }
  const int k = keypoints.dim(0);
  Heatmaps out{Tensor({k, height, width}), std::vector<bool>(k, false)};
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int c = 0; c < k; ++c) {
    const double x = keypoints.at(c, 0), y = keypoints.at(c, 1);
    const long cj = std::lround(x), ci = std::lround(y);
    if (!std::isfinite(x) || !std::isfinite(y) || cj < 0 || ci < 0 || cj >= width || ci >= height) {
      out.off_canvas[c] = true;
      continue;
    }
    for (int i = 0; i < height; ++i)
      for (int j = 0; j < width; ++j) {
        const double d2 = static_cast<double>((i - ci) * (i - ci) + (j - cj) * (j - cj));
        out.maps.at(c, i, j) = std::exp(-d2 * inv);
      }
  }
  return out;
}

std::vector<PairEntry> Dataset::split(const std::string& name) const {
  std::vector<PairEntry> out;
  for (const PairEntry& p : pairs)
    if (p.split == name) out.push_back(p);
  return out;
}

std::string make_stem(int identity, int pose) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d_%02d", identity, pose);
  return buf;
}

Dataset make_dataset(int n_identities, int poses_per_identity, std::uint64_t seed, int height,
                     int width) {
  if (n_identities < 1) throw UsageError("need at least one identity");
  if (poses_per_identity < 1) throw UsageError("need at least one pose per identity");
  Rng rng(seed);
  static constexpr Rgb kSkin[] = {{241, 194, 125}, {224, 172, 105}, {198, 134, 66}, {141, 85, 36}};
  static constexpr Rgb kHair[] = {{40, 28, 20}, {90, 56, 37}, {180, 140, 70}, {20, 20, 20}};

  Dataset ds;
  for (int id = 0; id < n_identities; ++id) {
    FigureSpec spec;
    spec.height = height;
    spec.width = width;
    spec.dress = rng.uniform() < 0.3;
    const Rgb skin = kSkin[rng.uniform_int(0, 3)];
    spec.colors[static_cast<int>(Part::kHair)] = kHair[rng.uniform_int(0, 3)];
    spec.colors[static_cast<int>(Part::kUpperClothes)] = random_rgb(rng, 20, 235);
    spec.colors[static_cast<int>(Part::kDress)] = random_rgb(rng, 20, 235);
    spec.colors[static_cast<int>(Part::kPants)] = random_rgb(rng, 20, 200);
    spec.colors[static_cast<int>(Part::kFace)] = skin;
    spec.colors[static_cast<int>(Part::kUpperSkin)] = skin;
    spec.colors[static_cast<int>(Part::kLeg)] = skin;
    spec.colors[static_cast<int>(Part::kBackground)] = random_rgb(rng, 150, 245);
    spec.arm_width = rng.uniform(1.7, 2.3);
    spec.leg_width = rng.uniform(2.2, 2.8);

    for (int pose = 0; pose < poses_per_identity; ++pose) {
      Render r;
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        spec.angles.neck = rng.uniform(-0.25, 0.25);
        for (int side = 0; side < 2; ++side) {
          spec.angles.shoulder[side] = rng.uniform(0.05, 1.9);
          spec.angles.elbow[side] = rng.uniform(-1.0, 1.2);
          spec.angles.hip[side] = rng.uniform(-0.1, 0.45);
          spec.angles.knee[side] = rng.uniform(-0.5, 0.4);
        }
        try {
          r = render_figure(spec);
          ok = true;
        } catch (const DataError&) {
        }
      }
      if (!ok) {
        spec.angles = Angles{};
        r = render_figure(spec);
      }
      ds.frames.push_back(Frame{make_stem(id, pose), id, pose, std::move(r.image),
                                std::move(r.masks), std::move(r.keypoints)});
    }
  }

  std::vector<int> order(n_identities);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n_identities - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);
  const int n_test = static_cast<int>(std::lround(0.1 * n_identities));
  std::vector<bool> is_test(n_identities, false);
  for (int i = 0; i < n_test; ++i) is_test[order[i]] = true;

  for (int id = 0; id < n_identities; ++id)
    for (int r = 0; r < poses_per_identity; ++r)
      for (int t = 0; t < poses_per_identity; ++t) {
        if (r == t) continue;
        ds.pairs.push_back(PairEntry{id * poses_per_identity + r, id * poses_per_identity + t,
                                     is_test[id] ? "test" : "train"});
      }
  return ds;
}

PersonSample make_sample(const Dataset& ds, const PairEntry& pair, double sigma) {
  const Frame& ref = ds.frames.at(pair.ref);
  const Frame& tgt = ds.frames.at(pair.tgt);
  PersonSample s;
  s.ref_image = ref.image;
  s.tgt_image = tgt.image;
  s.ref_pose = pose_to_heatmaps(ref.keypoints, ref.image.dim(1), ref.image.dim(2), sigma).maps;
  s.tgt_pose = pose_to_heatmaps(tgt.keypoints, tgt.image.dim(1), tgt.image.dim(2), sigma).maps;
  s.ref_masks = ref.masks;
  s.tgt_masks = tgt.masks;
  s.identity = ref.identity;
  s.ref_pose_id = ref.pose;
  s.tgt_pose_id = tgt.pose;
  s.ref_stem = ref.stem;
  s.tgt_stem = tgt.stem;
  return s;
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
  if (image.ndim() != 3 || image.dim(0) != 3) {
    throw ShapeError("write_ppm expects 3×H×W, got " + shape_str(image.shape()));
  }
  const int h = image.dim(1), w = image.dim(2);
  std::string bytes = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  bytes.reserve(bytes.size() + static_cast<std::size_t>(3) * h * w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(image.at(c, i, j), 0.0, 1.0);
        bytes.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0))));
      }
  write_file(path, bytes);
}

Tensor read_ppm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  int w = 0, h = 0, maxval = 0;
  const std::size_t off = parse_pnm_header(bytes, path, "P6", w, h, maxval);
  if (bytes.size() - off != static_cast<std::size_t>(3) * w * h) {
    throw DataError(path.string() + ": payload has " + std::to_string(bytes.size() - off) +
                    " bytes, expected " + std::to_string(3 * w * h));
  }
  Tensor img({3, h, w});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int c = 0; c < 3; ++c) {
        const auto v = static_cast<std::uint8_t>(bytes[off + (static_cast<std::size_t>(i) * w + j) * 3 + c]);
        img.at(c, i, j) = static_cast<double>(v) / maxval;
      }
  return img;
}

void write_mask_pgm(const std::filesystem::path& path, const parts::PartMaskSet& masks) {
  const std::vector<std::uint8_t> labels = masks.labels();
  std::string bytes = "P5\n" + std::to_string(masks.width()) + " " +
                      std::to_string(masks.height()) + "\n255\n";
  bytes.append(labels.begin(), labels.end());
  write_file(path, bytes);
}

parts::PartMaskSet read_mask_pgm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  int w = 0, h = 0, maxval = 0;
  const std::size_t off = parse_pnm_header(bytes, path, "P5", w, h, maxval);
  if (bytes.size() - off != static_cast<std::size_t>(w) * h) {
    throw DataError(path.string() + ": payload size does not match " + std::to_string(w) + "x" +
                    std::to_string(h));
  }
  std::vector<std::uint8_t> labels(bytes.begin() + static_cast<std::ptrdiff_t>(off), bytes.end());
  try {
    return parts::PartMaskSet::from_labels(labels, h, w);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_keypoints(const std::filesystem::path& path, const Tensor& keypoints) {
  std::string text;
  for (int i = 0; i < keypoints.dim(0); ++i) {
    const std::string name = keypoints.dim(0) == kKeypoints ? kKeypointNames[i] : "kp" + std::to_string(i);
    text += name + " " + fmt_double(keypoints.at(i, 0)) + " " + fmt_double(keypoints.at(i, 1)) + "\n";
  }
  write_file(path, text);
}

Tensor read_keypoints(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<double> coords;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string name;
    double x = 0, y = 0;
    std::string extra;
    if (!(ls >> name >> x >> y) || (ls >> extra)) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 'name x y'");
    }
    coords.push_back(x);
    coords.push_back(y);
  }
  if (coords.empty()) throw DataError(path.string() + ": no keypoints");
  return Tensor({static_cast<int>(coords.size() / 2), 2}, coords);
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError(dir.string() + ": cannot create directory (" + ec.message() + ")");
  for (const Frame& f : ds.frames) {
    write_ppm(dir / (f.stem + ".ppm"), f.image);
    write_mask_pgm(dir / (f.stem + ".mask.pgm"), f.masks);
    write_keypoints(dir / (f.stem + ".kp.txt"), f.keypoints);
  }
  std::string pairs;
  for (const PairEntry& p : ds.pairs) {
    pairs += ds.frames.at(p.ref).stem + " " + ds.frames.at(p.tgt).stem + " " + p.split + "\n";
  }
  write_file(dir / "pairs.txt", pairs);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const std::filesystem::path pairs_path = dir / "pairs.txt";
  std::istringstream in(read_file(pairs_path));
  Dataset ds;
  std::map<std::string, int> index;
  std::map<std::string, int> identities;
  auto frame_for = [&](const std::string& stem) {
    if (auto it = index.find(stem); it != index.end()) return it->second;
    Frame f;
    f.stem = stem;
    const std::size_t us = stem.rfind('_');
    const std::string who = us == std::string::npos ? stem : stem.substr(0, us);
    f.identity = identities.emplace(who, static_cast<int>(identities.size())).first->second;
    if (us != std::string::npos) {
      const std::string tail = stem.substr(us + 1);
      std::from_chars(tail.data(), tail.data() + tail.size(), f.pose);
    }
    f.image = read_ppm(dir / (stem + ".ppm"));
    f.masks = read_mask_pgm(dir / (stem + ".mask.pgm"));
    f.keypoints = read_keypoints(dir / (stem + ".kp.txt"));
    if (f.masks.height() != f.image.dim(1) || f.masks.width() != f.image.dim(2)) {
      throw DataError((dir / (stem + ".mask.pgm")).string() + ": mask size differs from image");
    }
    if (!ds.frames.empty() && (!f.image.same_shape(ds.frames[0].image) ||
                               f.keypoints.dim(0) != ds.frames[0].keypoints.dim(0))) {
      throw DataError(stem + ": image size or keypoint count differs from " + ds.frames[0].stem);
    }
    ds.frames.push_back(std::move(f));
    index[stem] = static_cast<int>(ds.frames.size()) - 1;
    return static_cast<int>(ds.frames.size()) - 1;
  };
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string ref, tgt, split, extra;
    if (!(ls >> ref >> tgt >> split) || (ls >> extra) || (split != "train" && split != "test")) {
      throw DataError(pairs_path.string() + ":" + std::to_string(lineno) +
                      ": expected 'ref_stem tgt_stem train|test'");
    }
    const int r = frame_for(ref);
    const int t = frame_for(tgt);
    ds.pairs.push_back(PairEntry{r, t, split});
  }
  if (ds.pairs.empty()) throw DataError(pairs_path.string() + ": no pairs");
  // One identity may not appear in both splits.
  std::map<int, std::string> split_of;
  for (const PairEntry& p : ds.pairs) {
    for (int f : {p.ref, p.tgt}) {
      auto [it, fresh] = split_of.emplace(ds.frames[f].identity, p.split);
      if (!fresh && it->second != p.split) {
        throw DataError(pairs_path.string() + ": identity of " + ds.frames[f].stem +
                        " appears in both train and test pairs");
      }
    }
  }
  return ds;
}

}  // namespace pdgan::data
