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

#include "pdgan/app/config.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "pdgan/body_parts.hpp"
#include "pdgan/errors.hpp"

namespace pdgan::app {
namespace {

using Type = Config::Type;

struct Default {
  const char* key;
  Type type;
  const char* value;
};

// Canonical order of resolved() output.
constexpr Default kDefaults[] = {
    {"seed", Type::kInt, "0"},
    {"data.h", Type::kInt, "64"},
    {"data.w", Type::kInt, "48"},
    {"data.sigma", Type::kReal, "1.5"},
    {"data.keypoints", Type::kInt, "10"},
    {"model.d", Type::kInt, "64"},
    {"model.heads", Type::kInt, "2"},
    {"model.n_transformer", Type::kInt, "2"},
    {"model.s_texture", Type::kInt, "128"},
    {"model.use_transformer", Type::kBool, "true"},
    {"model.use_fft", Type::kBool, "true"},
    {"model.fft_bias", Type::kBool, "true"},
    {"model.output_projection", Type::kBool, "true"},
    {"model.positional_encoding", Type::kBool, "false"},
    {"model.encoder_hidden", Type::kInt, "32"},
    {"model.part_hidden", Type::kInt, "32"},
    {"model.part_feature", Type::kInt, "64"},
    {"model.decoder_hidden", Type::kInt, "32"},
    {"model.decoder_out", Type::kInt, "16"},
    {"disc.scales", Type::kInt, "2"},
    {"disc.c1", Type::kInt, "16"},
    {"disc.c2", Type::kInt, "32"},
    {"parts.count", Type::kInt, "8"},
    {"parts.exclude", Type::kList, "[]"},
    {"norm.eps", Type::kReal, "1e-05"},
    {"frozen_net.seed", Type::kInt, "42"},
    {"loss.lambda1", Type::kReal, "2"},
    {"loss.lambda2", Type::kReal, "0.25"},
    {"loss.lambda3", Type::kReal, "200"},
    {"loss.lambda4", Type::kReal, "2.5"},
    {"loss.lambda5", Type::kReal, "0.5"},
    {"loss.crop_size", Type::kInt, "16"},
    {"train.lr", Type::kReal, "1e-05"},
    {"train.beta1", Type::kReal, "0.5"},
    {"train.beta2", Type::kReal, "0.999"},
    {"train.batch_size", Type::kInt, "8"},
    {"train.iters", Type::kInt, "2000"},
    {"train.trace_every", Type::kInt, "10"},
    {"train.checkpoint_every", Type::kInt, "500"},
    {"train.threads", Type::kInt, "0"},
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& text) {
  std::string body = trim(text);
  if (!body.empty() && body.front() == '[') {
    if (body.back() != ']') throw UsageError("unterminated list '" + text + "'");
    body = body.substr(1, body.size() - 2);
  }
  std::vector<std::string> items;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

// Validates text as the given type and returns its canonical spelling.
std::string canonical(const std::string& key, Type type, const std::string& raw) {
  const std::string v = trim(raw);
  auto bad = [&]() { return UsageError("bad value '" + raw + "' for " + key); };
  switch (type) {
    case Type::kInt: {
      long out = 0;
      auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
      if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) throw bad();
      return std::to_string(out);
    }
    case Type::kReal: {
      double out = 0;
      auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
      if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
        throw bad();
      }
      // Shortest spelling that round-trips.
      char buf[40];
      const auto res = std::to_chars(buf, buf + sizeof buf, out);
      return std::string(buf, res.ptr);
    }
    case Type::kBool:
      if (v == "true" || v == "1") return "true";
      if (v == "false" || v == "0") return "false";
      throw bad();
    case Type::kList: {
      std::string out = "[";
      const auto items = split_list(v);
      for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
      return out + "]";
    }
  }
  throw bad();
}

}  // namespace

Config::Config() {
  for (const Default& d : kDefaults) entries_.push_back({d.key, d.type, d.value});
}

Config Config::parse(std::string_view text, const std::string& origin) {
  Config cfg;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(where + "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (!seen.insert(key).second) throw UsageError(where + "duplicate key " + key);
    try {
      cfg.set(key, line.substr(eq + 1));
    } catch (const UsageError& e) {
      throw UsageError(where + e.what());
    }
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(path.string() + ": cannot open config");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void Config::set(const std::string& key, const std::string& value) {
  for (Entry& e : entries_) {
    if (e.key == key) {
      e.value = canonical(key, e.type, value);
      return;
    }
  }
  throw UsageError("unknown config key " + key);
}

bool Config::has(const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.key == key; });
}

const Config::Entry& Config::entry(const std::string& key, Type type) const {
  for (const Entry& e : entries_) {
    if (e.key != key) continue;
    if (e.type != type) throw UsageError("config key " + key + " read with the wrong type");
    return e;
  }
  throw UsageError("unknown config key " + key);
}

long Config::get_int(const std::string& key) const { return std::stol(entry(key, Type::kInt).value); }

double Config::get_real(const std::string& key) const {
  return std::strtod(entry(key, Type::kReal).value.c_str(), nullptr);
}

bool Config::get_bool(const std::string& key) const { return entry(key, Type::kBool).value == "true"; }

std::vector<std::string> Config::get_list(const std::string& key) const {
  return split_list(entry(key, Type::kList).value);
}

std::string Config::resolved() const {
  std::string out;
  for (const Entry& e : entries_) out += e.key + " = " + e.value + "\n";
  return out;
}

std::string Config::hash() const {
  const std::string text = resolved();
  const uLong crc = crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(text.data()),
                          static_cast<uInt>(text.size()));
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

namespace {

int positive_int(const Config& cfg, const std::string& key) {
  const long v = cfg.get_int(key);
  if (v < 1 || v > 1 << 20) throw UsageError(key + " must be a positive integer, got " + std::to_string(v));
  return static_cast<int>(v);
}

}  // namespace

nets::GeneratorConfig generator_config(const Config& cfg) {
  nets::GeneratorConfig g;
  g.keypoints = positive_int(cfg, "data.keypoints");
  g.d = positive_int(cfg, "model.d");
  g.heads = positive_int(cfg, "model.heads");
  g.n_transformer = positive_int(cfg, "model.n_transformer");
  g.texture_dim = positive_int(cfg, "model.s_texture");
  g.use_transformer = cfg.get_bool("model.use_transformer");
  g.use_fft = cfg.get_bool("model.use_fft");
  g.fft_bias = cfg.get_bool("model.fft_bias");
  g.output_projection = cfg.get_bool("model.output_projection");
  g.positional_encoding = cfg.get_bool("model.positional_encoding");
  g.encoder_hidden = positive_int(cfg, "model.encoder_hidden");
  g.part_hidden = positive_int(cfg, "model.part_hidden");
  g.part_feature = positive_int(cfg, "model.part_feature");
  g.decoder_hidden = positive_int(cfg, "model.decoder_hidden");
  g.decoder_out = positive_int(cfg, "model.decoder_out");
  g.eps = cfg.get_real("norm.eps");
  if (!(g.eps > 0.0)) throw UsageError("norm.eps must be positive");
  if (g.d % g.heads != 0) {
    throw UsageError("model.heads (" + std::to_string(g.heads) + ") must divide model.d (" +
                     std::to_string(g.d) + ")");
  }
  if (cfg.get_int("parts.count") != parts::kPartCount) {
    throw UsageError("parts.count must be " + std::to_string(parts::kPartCount) +
                     "; drop parts with parts.exclude");
  }
  std::vector<bool> excluded(parts::kPartCount, false);
  for (const std::string& name : cfg.get_list("parts.exclude")) excluded[parts::part_index(name)] = true;
  g.active_parts.clear();
  for (int p = 0; p < parts::kPartCount; ++p)
    if (!excluded[p]) g.active_parts.push_back(p);
  if (g.active_parts.empty()) throw UsageError("parts.exclude removes every part");
  return g;
}

nets::DiscriminatorConfig discriminator_config(const Config& cfg) {
  nets::DiscriminatorConfig d;
  d.scales = positive_int(cfg, "disc.scales");
  d.c1 = positive_int(cfg, "disc.c1");
  d.c2 = positive_int(cfg, "disc.c2");
  return d;
}

losses::LossWeights loss_weights(const Config& cfg) {
  losses::LossWeights w;
  w.l1 = cfg.get_real("loss.lambda1");
  w.adv = cfg.get_real("loss.lambda2");
  w.per = cfg.get_real("loss.lambda3");
  w.style = cfg.get_real("loss.lambda4");
  w.par = cfg.get_real("loss.lambda5");
  return w;
}

AdamConfig adam_config(const Config& cfg) {
  AdamConfig a;
  a.lr = cfg.get_real("train.lr");
  a.beta1 = cfg.get_real("train.beta1");
  a.beta2 = cfg.get_real("train.beta2");
  if (!(a.lr > 0.0)) throw UsageError("train.lr must be positive");
  if (!(a.beta1 >= 0.0 && a.beta1 < 1.0 && a.beta2 >= 0.0 && a.beta2 < 1.0)) {
    throw UsageError("train.beta1 and train.beta2 must lie in [0, 1)");
  }
  return a;
}

}  // namespace pdgan::app
