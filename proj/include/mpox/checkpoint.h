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

// Versioned binary checkpoint, all integers and floats little-endian:
//
//   "MPXM" | u32 version | u32 n + n bytes config text | u32 entries
//   entry: u32 n + name | u8 dtype (0 f32, 1 f64) | u8 kind (0 param,
//          1 buffer) | u32 rank | u64 dims[rank] | raw values

#ifndef MPOX_CHECKPOINT_H_
#define MPOX_CHECKPOINT_H_

#include <cstdint>
#include <string>

#include "mpox/model.h"

namespace mpox {

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void save_checkpoint(Model<T>& model, const std::string& path);

// Reads only the header and config block.
ModelConfig read_checkpoint_config(const std::string& path);

// Builds a model from the stored config and fills every tensor. Values
// stored in the other precision are converted.
template <typename T>
Model<T> load_checkpoint(const std::string& path);

// Fills an existing model; its config must equal the stored one.
template <typename T>
void load_weights(Model<T>& model, const std::string& path);

}  // namespace mpox

#endif  // MPOX_CHECKPOINT_H_
