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

// Convolutional building blocks: conv+BN unit, inverted residual,
// depthwise-separable local representation, ECA gating and the grouped
// local/global fusion block.

#ifndef MPOX_BLOCKS_H_
#define MPOX_BLOCKS_H_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mpox/module.h"
#include "mpox/ops.h"
#include "mpox/vision_mamba.h"

namespace mpox::blocks {

// conv (no bias) -> BN -> optional SiLU.
template <typename T>
class ConvBn {
 public:
  ConvBn(std::size_t in, std::size_t out, std::size_t kernel,
         std::size_t stride, std::size_t groups, bool act, Rng& rng);

  // Training mode uses batch statistics and updates the running ones.
  Var<T> forward(const Var<T>& x, bool training);
  void collect(const std::string& prefix, ParamList<T>& out);

  Var<T> weight;
  Var<T> gamma, beta;
  ops::BatchNormStats<T> stats;

 private:
  ops::Conv2dOptions opt_;
  bool act_;
};

struct InResConfig {
  std::size_t in_channels = 32;
  std::size_t out_channels = 32;
  std::size_t stride = 1;
  std::size_t expansion = 1;
};

// PW expand -> DW 3x3 (stride) -> PW project, each followed by BN; SiLU
// after the first two. Residual iff stride 1 and channels unchanged.
template <typename T>
class InRes {
 public:
  InRes(const InResConfig& cfg, Rng& rng);
  Var<T> forward(const Var<T>& x, bool training);
  void collect(const std::string& prefix, ParamList<T>& out);
  bool has_residual() const { return residual_; }
  const InResConfig& config() const { return cfg_; }

  ConvBn<T> expand, depthwise, project;

 private:
  InResConfig cfg_;
  bool residual_;
};

// DW 3x3 -> BN -> SiLU -> PW -> BN -> SiLU, shape preserving.
template <typename T>
class LocalRepresentation {
 public:
  LocalRepresentation(std::size_t channels, Rng& rng);
  Var<T> forward(const Var<T>& x, bool training);
  void collect(const std::string& prefix, ParamList<T>& out);

  ConvBn<T> depthwise, pointwise;
};

// floor((log2 C + 1) / 2), bumped to odd, at least 3, at most C.
std::size_t eca_kernel_size(std::size_t channels);

// GAP -> 1-D conv across channels -> sigmoid -> channel rescale.
template <typename T>
class Eca {
 public:
  Eca(std::size_t channels, std::size_t kernel, Rng& rng);
  Var<T> forward(const Var<T>& x) const;
  void collect(const std::string& prefix, ParamList<T>& out);

  Var<T> weight;  // [k]

 private:
  std::size_t channels_;
};

// Channel split with sizes as equal as possible, remainder on the last.
std::vector<std::size_t> split_sizes(std::size_t channels, std::size_t groups);

struct GmlgffConfig {
  std::size_t channels = 64;
  std::size_t groups = 4;
  bool enable_global = true;
  bool enable_fusion = true;
  std::size_t state_size = 2;
  // Rank of the delta projection in every VM layer; 0 means half the
  // layer's channel width.
  std::size_t dt_rank = 0;
};

// out = x + SiLU(BN(PW(concat(ECA(L), G)))) with L the local branch and G
// the grouped VM branch over L. Without fusion: x + G; without the global
// branch: x + L.
template <typename T>
class Gmlgff {
 public:
  Gmlgff(const GmlgffConfig& cfg, Rng& rng);
  Var<T> forward(const Var<T>& x, bool training);
  void collect(const std::string& prefix, ParamList<T>& out);
  const GmlgffConfig& config() const { return cfg_; }

  LocalRepresentation<T> local;
  std::vector<vm::VmLayer<T>> global;
  std::optional<Eca<T>> eca;
  std::optional<ConvBn<T>> fuse;

 private:
  GmlgffConfig cfg_;
  std::vector<std::size_t> splits_;
};

}  // namespace mpox::blocks

#endif  // MPOX_BLOCKS_H_
