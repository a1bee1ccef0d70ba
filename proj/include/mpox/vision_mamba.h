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

// Four-direction cross-scan over 2-D maps and the shape-preserving vision
// Mamba layer built on it.

#ifndef MPOX_VISION_MAMBA_H_
#define MPOX_VISION_MAMBA_H_

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "mpox/autodiff.h"
#include "mpox/module.h"
#include "mpox/ssm.h"

namespace mpox::vm {

enum class ScanDirection { kRowForward, kColForward, kRowReverse, kColReverse };

inline constexpr std::array<ScanDirection, 4> kAllDirections = {
    ScanDirection::kRowForward, ScanDirection::kColForward,
    ScanDirection::kRowReverse, ScanDirection::kColReverse};

const char* direction_name(ScanDirection dir);

// order[i] is the row-major grid index visited at sequence position i.
std::vector<std::size_t> scan_order(ScanDirection dir, std::size_t h,
                                    std::size_t w);

// Inverse permutation: inv[order[i]] = i.
std::vector<std::size_t> invert_order(const std::vector<std::size_t>& order);

// fmap [C, H, W] -> four sequences [H*W, C], in kAllDirections order.
template <typename T>
std::array<Tensor<T>, 4> cross_scan(const Tensor<T>& fmap);

// Un-permutes each sequence to grid order and sums: -> [C, H, W].
template <typename T>
Tensor<T> cross_merge(const std::array<Tensor<T>, 4>& seqs, std::size_t h,
                      std::size_t w);

struct VmLayerConfig {
  std::size_t channels = 16;
  std::size_t state_size = 2;
  std::size_t dt_rank = 8;
  double eps = 1e-5;
};

// LN -> cross-scan -> one S6 per direction -> merge -> LN -> + input.
template <typename T>
class VmLayer {
 public:
  VmLayer(const VmLayerConfig& cfg, Rng& rng);

  // x [N, C, H, W] -> [N, C, H, W]
  Var<T> forward(const Var<T>& x) const;

  void collect(const std::string& prefix, ParamList<T>& out);
  const VmLayerConfig& config() const { return cfg_; }

  ssm::S6<T>& scan(std::size_t dir) { return scans_.at(dir); }

  Var<T> norm_in_gamma, norm_in_beta;
  Var<T> norm_out_gamma, norm_out_beta;

 private:
  VmLayerConfig cfg_;
  std::vector<ssm::S6<T>> scans_;
};

}  // namespace mpox::vm

#endif  // MPOX_VISION_MAMBA_H_
