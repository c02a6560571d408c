// Copyright 2026 The lpskit Authors.
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

#include "lps/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace lps {
namespace {

constexpr char kMagic[4] = {'L', 'P', 'S', 'T'};

void need(std::string_view in, std::size_t offset, std::size_t n, const char* what) {
  if (offset + n > in.size()) {
    throw Error(ErrorKind::kFormat,
                std::string("tensor file truncated while reading ") + what + " at byte offset " +
                    std::to_string(offset),
                {{"offset", std::to_string(offset)}});
  }
}

}  // namespace

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint16_t get_u16(std::string_view in, std::size_t offset) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(in[offset]) |
                                    (static_cast<unsigned char>(in[offset + 1]) << 8));
}

std::uint32_t get_u32(std::string_view in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return v;
}

float get_f32(std::string_view in, std::size_t offset) {
  return std::bit_cast<float>(get_u32(in, offset));
}

std::string encode_tensors(const std::vector<NamedTensor>& records) {
  std::string out(kMagic, 4);
  put_u32(out, kTensorFileVersion);
  for (const auto& r : records) {
    if (r.name.size() > 0xFFFF) {
      throw Error(ErrorKind::kRange, "tensor name longer than 65535 bytes",
                  {{"length", std::to_string(r.name.size())}});
    }
    put_u16(out, static_cast<std::uint16_t>(r.name.size()));
    out += r.name;
    out.push_back(static_cast<char>(r.tensor.rank()));
    for (int e : r.tensor.shape()) put_u32(out, static_cast<std::uint32_t>(e));
    for (float v : r.tensor.storage()) put_f32(out, v);
  }
  return out;
}

std::vector<NamedTensor> decode_tensors(std::string_view bytes) {
  need(bytes, 0, 8, "header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorKind::kFormat, "bad tensor file magic", {{"offset", "0"}});
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kTensorFileVersion) {
    throw Error(ErrorKind::kFormat, "unsupported tensor file version " + std::to_string(version),
                {{"version", std::to_string(version)}});
  }
  std::vector<NamedTensor> out;
  std::size_t pos = 8;
  while (pos < bytes.size()) {
    need(bytes, pos, 2, "name length");
    const std::uint16_t name_len = get_u16(bytes, pos);
    pos += 2;
    need(bytes, pos, name_len + 1u, "name");
    NamedTensor rec;
    rec.name.assign(bytes.substr(pos, name_len));
    pos += name_len;
    const int rank = static_cast<unsigned char>(bytes[pos++]);
    if (rank > 4) {
      throw Error(ErrorKind::kFormat, "tensor rank " + std::to_string(rank) + " above 4",
                  {{"offset", std::to_string(pos - 1)}, {"name", rec.name}});
    }
    need(bytes, pos, 4u * rank, "extents");
    Shape shape;
    std::size_t numel = 1;
    for (int i = 0; i < rank; ++i) {
      const std::uint32_t e = get_u32(bytes, pos);
      pos += 4;
      if (e > 0x7FFFFFFFu) {
        throw Error(ErrorKind::kFormat, "tensor extent out of range",
                    {{"offset", std::to_string(pos - 4)}, {"name", rec.name}});
      }
      shape.push_back(static_cast<int>(e));
      numel *= e;
    }
    if (numel > (bytes.size() - pos) / 4) need(bytes, pos, numel * 4, "data");
    std::vector<float> data(numel);
    for (std::size_t i = 0; i < numel; ++i, pos += 4) data[i] = get_f32(bytes, pos);
    rec.tensor = Tensor(std::move(shape), std::move(data));
    out.push_back(std::move(rec));
  }
  return out;
}

void save_params(const ParamStore<float>& store, const std::filesystem::path& path) {
  std::vector<NamedTensor> records;
  for (const auto& p : store) records.push_back({p.name(), p.value()});
  write_file(path, encode_tensors(records));
}

void load_params(ParamStore<float>& store, const std::filesystem::path& path) {
  const auto records = decode_tensors(read_file(path));
  if (records.size() != store.size()) {
    throw Error(ErrorKind::kData,
                "checkpoint holds " + std::to_string(records.size()) + " tensors, model expects " +
                    std::to_string(store.size()),
                {{"path", path.string()}});
  }
  for (const auto& r : records) {
    Param<float>* p = store.find(r.name);
    if (p == nullptr) {
      throw Error(ErrorKind::kData, "checkpoint tensor " + r.name + " is not a model parameter",
                  {{"path", path.string()}, {"name", r.name}});
    }
    if (p->value().shape() != r.tensor.shape()) {
      throw Error(ErrorKind::kData,
                  "checkpoint tensor " + r.name + " has shape " + shape_str(r.tensor.shape()) +
                      ", model expects " + shape_str(p->value().shape()),
                  {{"path", path.string()}, {"name", r.name}});
    }
    p->value() = r.tensor;
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::kData, "cannot open " + path.string(), {{"path", path.string()}});
  }
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorKind::kData, "cannot write " + path.string(), {{"path", path.string()}});
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorKind::kData, "short write to " + path.string(), {{"path", path.string()}});
  }
}

}  // namespace lps
