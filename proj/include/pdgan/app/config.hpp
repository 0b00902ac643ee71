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
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pdgan/adam.hpp"
#include "pdgan/losses.hpp"
#include "pdgan/networks.hpp"

namespace pdgan::app {

/// Flat `key = value` configuration with a fixed set of typed keys. Every
/// key always has a value; files only override defaults.
class Config {
 public:
  enum class Type { kInt, kReal, kBool, kList };

  Config();

  /// Parses `key = value` lines; `#` starts a comment. Unknown keys,
  /// duplicate keys, and malformed values throw UsageError citing origin:line.
  static Config parse(std::string_view text, const std::string& origin = "<config>");
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  long get_int(const std::string& key) const;
  double get_real(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;

  /// Every key in canonical order, one `key = value` line each. parse() of
  /// the result reproduces this config.
  std::string resolved() const;
  /// CRC32 of resolved(), as 8 hex digits.
  std::string hash() const;

 private:
  struct Entry {
    std::string key;
    Type type;
    std::string value;  // canonical text
  };
  const Entry& entry(const std::string& key, Type type) const;
  std::vector<Entry> entries_;
};

nets::GeneratorConfig generator_config(const Config& cfg);
nets::DiscriminatorConfig discriminator_config(const Config& cfg);
losses::LossWeights loss_weights(const Config& cfg);
AdamConfig adam_config(const Config& cfg);

}  // namespace pdgan::app
