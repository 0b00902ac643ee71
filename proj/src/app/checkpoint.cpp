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

#include "pdgan/app/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "pdgan/errors.hpp"

namespace pdgan::app {
namespace {

constexpr char kMagic[4] = {'P', 'D', 'G', 'N'};

std::uint32_t crc_of(std::string_view bytes) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0),
                                          reinterpret_cast<const Bytef*>(bytes.data()),
                                          static_cast<uInt>(bytes.size())));
}

template <typename T>
void put(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  Reader(std::string_view bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw DataError(origin_ + ": truncated while reading " + what);
  }
  std::string_view bytes_;
  const std::string& origin_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.config_text.size()));
  out += ckpt.config_text;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw UsageError("tensor name too long: " + name.substr(0, 40) + "...");
    }
    if (t.ndim() > std::numeric_limits<std::uint8_t>::max()) throw UsageError(name + ": too many dims");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.ndim()));
    for (int d : t.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : t.values()) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  put<std::uint32_t>(out, crc_of(out));
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes, const std::string& origin) {
  if (bytes.size() < 8 || bytes.substr(0, 4) != std::string_view(kMagic, 4)) {
    throw DataError(origin + ": not a checkpoint (bad magic)");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  Reader tail(bytes.substr(bytes.size() - 4), origin);
  const std::uint32_t stored = tail.get<std::uint32_t>("crc");
  if (crc_of(body) != stored) throw ChecksumError(origin + ": checkpoint CRC32 mismatch");

  Reader r(body, origin);
  r.take(4, "magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw DataError(origin + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto config_len = r.get<std::uint32_t>("config length");
  ckpt.config_text = std::string(r.take(config_len, "config"));
  const auto count = r.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint16_t>("name length");
    std::string name(r.take(name_len, "name"));
    const auto ndim = r.get<std::uint8_t>("ndim");
    Shape shape;
    for (int d = 0; d < ndim; ++d) shape.push_back(static_cast<int>(r.get<std::uint32_t>("dims")));
    Tensor t(shape);
    for (double& v : t.values()) v = std::bit_cast<double>(r.get<std::uint64_t>("payload"));
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (r.pos() != body.size()) throw DataError(origin + ": trailing bytes after the last tensor");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError(path.string() + ": write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open checkpoint");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str(), path.string());
}

void append_params(Checkpoint& ckpt, const ParamStore& store) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    ckpt.tensors.emplace_back(store.name(store.id(i)), store.value(store.id(i)));
  }
}

void restore_params(ParamStore& store, const Checkpoint& ckpt) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : ckpt.tensors) by_name[name] = &t;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const ParamId id = store.id(i);
    auto it = by_name.find(store.name(id));
    if (it == by_name.end()) throw DataError("checkpoint has no tensor " + store.name(id));
    if (!it->second->same_shape(store.value(id))) {
      throw DataError("checkpoint tensor " + store.name(id) + " has shape " +
                      shape_str(it->second->shape()) + ", model expects " +
                      shape_str(store.value(id).shape()));
    }
    store.value(id) = *it->second;
  }
}

}  // namespace pdgan::app
