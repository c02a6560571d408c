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

// Flat binary tensor container: magic "LPST", u32 version, then records of
// (u16 name length, name bytes, u8 rank, u32 extents, f32 data), all
// little-endian. Used for parameter snapshots and logit files.

#ifndef LPS_SERIALIZE_HPP_
#define LPS_SERIALIZE_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lps/autodiff.hpp"
#include "lps/tensor.hpp"

namespace lps {

inline constexpr std::uint32_t kTensorFileVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

std::string encode_tensors(const std::vector<NamedTensor>& records);
std::vector<NamedTensor> decode_tensors(std::string_view bytes);

void save_params(const ParamStore<float>& store, const std::filesystem::path& path);
// Names and shapes must match the store exactly.
void load_params(ParamStore<float>& store, const std::filesystem::path& path);

// Whole-file helpers; failures raise kData errors carrying the path.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

// Little-endian primitives shared by the on-disk formats.
void put_u16(std::string& out, std::uint16_t v);
void put_u32(std::string& out, std::uint32_t v);
void put_f32(std::string& out, float v);
std::uint16_t get_u16(std::string_view in, std::size_t offset);
std::uint32_t get_u32(std::string_view in, std::size_t offset);
float get_f32(std::string_view in, std::size_t offset);

}  // namespace lps

#endif  // LPS_SERIALIZE_HPP_
