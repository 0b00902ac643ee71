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

#include "pdgan/app/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "pdgan/app/checkpoint.hpp"
#include "pdgan/app/config.hpp"
#include "pdgan/app/gradcheck_suite.hpp"
#include "pdgan/app/trainer.hpp"
#include "pdgan/data.hpp"
#include "pdgan/errors.hpp"

namespace pdgan::app {
namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<data::PairEntry> select_pairs(const data::Dataset& ds, const std::string& spec) {
  if (spec == "train" || spec == "test") return ds.split(spec);
  if (spec == "all") return ds.pairs;
  std::map<std::string, int> frame_of;
  for (std::size_t i = 0; i < ds.frames.size(); ++i) frame_of[ds.frames[i].stem] = static_cast<int>(i);
  std::istringstream in(read_text(spec));
  std::vector<data::PairEntry> out;
  std::vector<std::string> missing;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string ref, tgt;
    if (!(ls >> ref)) continue;
    if (!(ls >> tgt)) throw DataError(spec + ":" + std::to_string(lineno) + ": expected 'ref tgt'");
    auto r = frame_of.find(ref), t = frame_of.find(tgt);
    if (r == frame_of.end()) missing.push_back(ref);
    if (t == frame_of.end()) missing.push_back(tgt);
    if (r != frame_of.end() && t != frame_of.end()) out.push_back({r->second, t->second, "requested"});
  }
  if (!missing.empty()) {
    std::string msg = spec + ": " + std::to_string(missing.size()) + " stem(s) not in the dataset:";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }
  return out;
}

// Stem of an image file name: drops ".gen.ppm" or ".ppm"; empty otherwise.
std::string image_stem(const fs::path& p) {
  const std::string name = p.filename().string();
  for (const std::string suffix : {".gen.ppm", ".ppm"}) {
    if (name.size() > suffix.size() && name.ends_with(suffix)) {
      return name.substr(0, name.size() - suffix.size());
    }
  }
  return {};
}

std::map<std::string, fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError(dir.string() + ": not a directory");
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string stem = image_stem(e.path());
    if (stem.empty()) continue;
    if (!out.emplace(stem, e.path()).second) {
      throw DataError(dir.string() + ": two images share the stem " + stem);
    }
  }
  return out;
}

std::string manifest_value(const fs::path& dir, const std::string& key) {
  std::ifstream in(dir / "manifest.txt");
  std::string line;
  while (std::getline(in, line)) {
    if (line.starts_with(key + "=")) return line.substr(key.size() + 1);
  }
  return "unknown";
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ChecksumError*>(&e)) return kExitChecksum;
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  if (dynamic_cast<const UsageError*>(&e)) return kExitUsage;
  return kExitData;
}

void cmd_synth_data(const SynthArgs& args, std::ostream& log) {
  if (args.out.empty()) throw UsageError("--out is required");
  const data::Dataset ds =
      data::make_dataset(args.identities, args.poses, args.seed, args.height, args.width);
  data::save_dataset(ds, args.out);
  log << "wrote " << ds.frames.size() << " frames and " << ds.pairs.size() << " pairs ("
      << ds.split("train").size() << " train, " << ds.split("test").size() << " test) to "
      << args.out.string() << "\n";
}

std::vector<TraceRow> cmd_train(const TrainArgs& args, std::ostream& log) {
  Config cfg = args.config.empty() ? Config() : Config::load(args.config);
  for (const std::string& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("override '" + kv + "' is not key=value");
    const auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(' '));
      s.erase(s.find_last_not_of(' ') + 1);
      return s;
    };
    cfg.set(trim(kv.substr(0, eq)), kv.substr(eq + 1));
  }
  const data::Dataset ds = data::load_dataset(args.data);
  std::vector<TraceRow> rows = run_training(cfg, ds, args.out, log);
  log << "final checkpoint: " << (args.out / "final.pdgn").string() << "\n";
  return rows;
}

std::size_t cmd_generate(const GenerateArgs& args, std::ostream& log) {
  const Model model = Model::from_checkpoint(load_checkpoint(args.ckpt));
  const data::Dataset ds = data::load_dataset(args.data);
  const Config& cfg = model.config;
  if (ds.height() != cfg.get_int("data.h") || ds.width() != cfg.get_int("data.w") ||
      ds.frames[0].keypoints.dim(0) != cfg.get_int("data.keypoints")) {
    throw DataError(args.data.string() + ": image size or keypoint count does not match the checkpoint");
  }
  const std::vector<data::PairEntry> pairs = select_pairs(ds, args.pairs);
  std::error_code ec;
  fs::create_directories(args.out, ec);
  if (ec) throw DataError(args.out.string() + ": cannot create directory (" + ec.message() + ")");
  const SampleSource source(ds, cfg.get_real("data.sigma"));
  for (const data::PairEntry& p : pairs) {
    const PersonSample s = source.sample(p);
    data::write_ppm(args.out / (s.ref_stem + "_" + s.tgt_stem + ".gen.ppm"), generate_image(model, s));
  }
  std::ofstream(args.out / "manifest.txt") << "config_hash=" << cfg.hash() << "\n"
                                           << "dataset=" << args.data.string() << "\n";
  log << "generated " << pairs.size() << " image(s) in " << args.out.string() << "\n";
  return pairs.size();
}

metrics::MetricReport cmd_evaluate(const EvaluateArgs& args, std::ostream& log) {
  const auto gen = list_images(args.gen);
  const auto truth = list_images(args.truth);
  // A dataset directory maps "<ref>_<tgt>" onto the target frame.
  std::map<std::string, std::string> via_pairs;
  if (fs::exists(args.truth / "pairs.txt")) {
    std::istringstream in(read_text(args.truth / "pairs.txt"));
    std::string ref, tgt, split;
    while (in >> ref >> tgt >> split) via_pairs[ref + "_" + tgt] = tgt;
  }
  std::vector<metrics::ImagePair> pairs;
  std::vector<std::string> unmatched;
  std::set<std::string> used;
  for (const auto& [stem, path] : gen) {
    std::string key = stem;
    if (!truth.contains(key)) {
      auto it = via_pairs.find(stem);
      key = it == via_pairs.end() ? std::string() : it->second;
    }
    if (key.empty() || !truth.contains(key)) {
      unmatched.push_back(stem);
      continue;
    }
    used.insert(key);
    pairs.push_back({stem, data::read_ppm(path), data::read_ppm(truth.at(key))});
  }
  if (via_pairs.empty()) {
    for (const auto& [stem, path] : truth)
      if (!used.contains(stem)) unmatched.push_back(stem + " (truth only)");
  }
  if (!unmatched.empty()) {
    std::string msg = std::to_string(unmatched.size()) + " unmatched stem(s):";
    for (const auto& s : unmatched) msg += " " + s;
    throw DataError(msg);
  }
  const losses::FrozenFeatureNet net;
  metrics::MetricReport report = metrics::evaluate_set(pairs, net);
  report.dataset = args.truth.string();
  report.config_hash = manifest_value(args.gen, "config_hash");
  const std::string text = format_report(report);
  if (!args.out.empty()) {
    std::ofstream out(args.out);
    if (!out) throw DataError(args.out.string() + ": cannot open for writing");
    out << text;
  }
  log << "pairs        " << report.stems.size() << "\n"
      << "PSNR mean    " << fmt(report.psnr_mean) << " dB\n"
      << "FID          " << (report.fid ? fmt(*report.fid) : "omitted (" + report.fid_note + ")") << "\n"
      << "perceptual   " << fmt(report.perceptual_mean) << "\n"
      << "backbone     " << report.backbone << "\n";
  return report;
}

std::string format_report(const metrics::MetricReport& r) {
  std::ostringstream out;
  out << "n_pairs=" << r.stems.size() << "\n";
  out << "psnr_mean=" << fmt(r.psnr_mean) << "\n";
  if (r.fid) {
    out << "fid=" << fmt(*r.fid) << "\n";
  } else {
    out << "fid=omitted\nfid_note=" << r.fid_note << "\n";
  }
  out << "lpips_like_mean=" << fmt(r.perceptual_mean) << "\n";
  out << "backbone=" << r.backbone << "\n";
  out << "dataset=" << r.dataset << "\n";
  out << "config_hash=" << r.config_hash << "\n";
  for (std::size_t i = 0; i < r.stems.size(); ++i) {
    out << "pair." << r.stems[i] << ".psnr=" << fmt(r.psnr[i]) << "\n";
    out << "pair." << r.stems[i] << ".lpips_like=" << fmt(r.perceptual[i]) << "\n";
  }
  return out.str();
}

bool cmd_gradcheck(const GradcheckArgs& args, std::ostream& log) {
  const std::vector<GradCheckEntry> entries = run_gradchecks(args.module, args.seed);
  bool ok = true;
  for (const GradCheckEntry& e : entries) {
    char line[160];
    std::snprintf(line, sizeof line, "%-10s %-28s max_rel_err=%.3e coords=%-5zu %s\n",
                  e.module.c_str(), e.op.c_str(), e.result.max_rel_error, e.result.coords_checked,
                  e.passed() ? "ok" : "FAIL");
    log << line;
    ok = ok && e.passed();
  }
  log << (ok ? "all " : "some ") << entries.size() << " checks "
      << (ok ? "passed" : "exceeded the tolerance") << " (tol " << kGradTolerance << ", seed "
      << args.seed << ")\n";
  return ok;
}

}  // namespace pdgan::app
