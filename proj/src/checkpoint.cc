// Copyright 2026 The MpoxMamba Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mpox/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <type_traits>
#include <vector>

namespace mpox {

namespace {

constexpr char kMagic[4] = {'M', 'P', 'X', 'M'};
constexpr std::uint8_t kParam = 0, kBuffer = 1;

template <typename U>
void put_le(std::ostream& os, U v) {
  static_assert(std::is_unsigned_v<U>);
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  os.write(bytes, sizeof(U));
}

template <typename T>
using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  template <typename U>
  U le() {
    unsigned char bytes[sizeof(U)];
    read(bytes, sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(bytes[i]) << (8 * i);
    }
    return v;
  }

  template <typename F>
  F real() {
    return std::bit_cast<F>(le<Bits<F>>());
  }

  std::string str(std::uint32_t limit) {
    const auto n = le<std::uint32_t>();
    if (n > limit) fail("string length " + std::to_string(n) + " too large");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }

  void read(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated file");
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError("checkpoint " + path_ + ": " + msg);
  }

 private:
  std::istream& in_;
  std::string path_;
};

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  return in;
}

ModelConfig read_header(Reader& r) {
  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) r.fail("bad magic bytes");
  const auto version = r.le<std::uint32_t>();
  if (version != kCheckpointVersion) {
    r.fail("unsupported version " + std::to_string(version));
  }
  std::istringstream text(r.str(1u << 20));
  KeyValues kv = parse_key_values(text, "checkpoint config");
  ModelConfig cfg;
  try {
    cfg.apply(kv);
    cfg.validate();
  } catch (const ConfigError& e) {
    r.fail(std::string("invalid config block: ") + e.what());
  }
  if (!kv.empty()) r.fail("unknown config key '" + kv.begin()->first + "'");
  return cfg;
}

template <typename T>
void fill_model(Model<T>& model, Reader& r) {
  std::map<std::string, std::pair<Tensor<T>*, std::uint8_t>> slots;
  ParamList<T> list = model.parameters();
  for (auto& p : list.params) {
    slots[p.name] = {&p.var->mutable_value(), kParam};
  }
  for (auto& b : list.buffers) slots[b.name] = {b.tensor, kBuffer};

  const auto count = r.le<std::uint32_t>();
  std::map<std::string, bool> seen;
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::string name = r.str(4096);
    const auto dtype = r.le<std::uint8_t>();
    const auto kind = r.le<std::uint8_t>();
    const auto rank = r.le<std::uint32_t>();
    if (dtype > 1) r.fail("tensor " + name + " has unknown dtype");
    if (rank > 8) r.fail("tensor " + name + " has rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.le<std::uint64_t>());
    auto it = slots.find(name);
    if (it == slots.end()) r.fail("unexpected tensor " + name);
    if (!seen.emplace(name, true).second) r.fail("duplicate tensor " + name);
    Tensor<T>& dst = *it->second.first;
    if (kind != it->second.second) r.fail("tensor " + name + " has wrong kind");
    if (shape != dst.shape()) {
      r.fail("tensor " + name + " has shape " + shape_str(shape) +
             ", model expects " + shape_str(dst.shape()));
    }
    for (std::size_t i = 0; i < dst.numel(); ++i) {
      dst[i] = dtype == 0 ? static_cast<T>(r.real<float>())
                          : static_cast<T>(r.real<double>());
    }
  }
  for (const auto& [name, slot] : slots) {
    if (!seen.count(name)) r.fail("missing tensor " + name);
  }
}

}  // namespace

template <typename T>
void save_checkpoint(Model<T>& model, const std::string& path) {
  std::ostringstream os(std::ios::binary);
  os.write(kMagic, 4);
  put_le<std::uint32_t>(os, kCheckpointVersion);
  const std::string cfg = format_key_values(model.config().to_key_values());
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.size()));
  os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

  ParamList<T> list = model.parameters();
  put_le<std::uint32_t>(
      os, static_cast<std::uint32_t>(list.params.size() + list.buffers.size()));
  auto entry = [&os](const std::string& name, const Tensor<T>& t,
                     std::uint8_t kind) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint8_t>(os, sizeof(T) == 4 ? 0 : 1);
    put_le<std::uint8_t>(os, kind);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_le<std::uint64_t>(os, d);
    for (T v : t.data()) put_le<Bits<T>>(os, std::bit_cast<Bits<T>>(v));
  };
  for (const auto& p : list.params) entry(p.name, p.var->value(), kParam);
  for (const auto& b : list.buffers) entry(b.name, *b.tensor, kBuffer);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  const std::string bytes = os.str();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("cannot write checkpoint " + path);
}

ModelConfig read_checkpoint_config(const std::string& path) {
  std::ifstream in = open_in(path);
  Reader r(in, path);
  return read_header(r);
}

template <typename T>
Model<T> load_checkpoint(const std::string& path) {
  std::ifstream in = open_in(path);
  Reader r(in, path);
  Model<T> model(read_header(r), 0);
  fill_model(model, r);
  return model;
}

template <typename T>
void load_weights(Model<T>& model, const std::string& path) {
  std::ifstream in = open_in(path);
  Reader r(in, path);
  if (!(read_header(r) == model.config())) {
    r.fail("stored config does not match the model");
  }
  fill_model(model, r);
}

template void save_checkpoint(Model<float>&, const std::string&);
template void save_checkpoint(Model<double>&, const std::string&);
template Model<float> load_checkpoint(const std::string&);
template Model<double> load_checkpoint(const std::string&);
template void load_weights(Model<float>&, const std::string&);
template void load_weights(Model<double>&, const std::string&);

}  // namespace mpox
