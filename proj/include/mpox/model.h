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

// The full classifier: stem, inverted residual downsampling, two stages of
// GMLGFF blocks, pointwise head, pooling and a linear classifier.
//
//   conv3x3 s2 -> InRes(stem) -> InRes s2 -> stage2 -> InRes s2 -> stage3
//   -> InRes s2 -> PW head -> GAP -> linear

#ifndef MPOX_MODEL_H_
#define MPOX_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mpox/blocks.h"
#include "mpox/config.h"

namespace mpox {

struct ModelConfig {
  std::size_t input_size = 224;
  std::size_t in_channels = 3;
  std::size_t stem_channels = 32;
  // Outputs of the three stride-2 InRes blocks; stages 2 and 3 run at the
  // first two widths.
  std::vector<std::size_t> widths{64, 128, 256};
  std::size_t head_channels = 512;
  std::vector<std::size_t> depths{1, 7};
  std::size_t groups = 4;
  std::size_t state_size = 2;
  std::size_t dt_rank = 0;  // 0: half of each VM layer's width
  std::size_t expansion = 1;
  std::size_t num_classes = 2;
  bool enable_global = true;
  bool enable_fusion = true;

  // Throws ConfigError.
  void validate() const;

  // All channel widths divided by `divisor` (rounded down, at least 1).
  ModelConfig scaled(std::size_t divisor) const;

  // Keys carry the "model." prefix.
  KeyValues to_key_values() const;
  // Consumes the recognised "model.*" keys from `kv`.
  void apply(KeyValues& kv);

  bool operator==(const ModelConfig&) const = default;
};

// basic | vm | vm-fusion | g1 | g2 | g3 | g4
ModelConfig apply_ablation(ModelConfig cfg, const std::string& name);

template <typename T>
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);

  // x [N, in_channels, S, S] -> logits [N, num_classes].
  Var<T> forward(const Var<T>& x, bool training = false);
  // Output of the PW head: [N, head_channels, S/16, S/16].
  Var<T> features(const Var<T>& x, bool training = false);
  // GAP + linear on a feature map.
  Var<T> classify(const Var<T>& features) const;

  // Stable, unique dotted names in forward order.
  ParamList<T> parameters();
  const ModelConfig& config() const { return cfg_; }

  blocks::ConvBn<T> stem;
  blocks::InRes<T> stem_block;
  blocks::InRes<T> down1;
  std::vector<blocks::Gmlgff<T>> stage2;
  blocks::InRes<T> down2;
  std::vector<blocks::Gmlgff<T>> stage3;
  blocks::InRes<T> down3;
  blocks::ConvBn<T> head;
  Var<T> fc_weight, fc_bias;

 private:
  Model(const ModelConfig& cfg, Rng&& rng);

  ModelConfig cfg_;
};

// Sum of trainable element counts.
template <typename T>
std::size_t count_params(Model<T>& model);

// K*K*(Cin/groups)*Cout*H'*W' multiply-accumulates of one convolution.
std::uint64_t conv_macs(std::size_t in_channels, std::size_t out_channels,
                        std::size_t kernel, std::size_t groups,
                        std::size_t out_h, std::size_t out_w);

struct LayerProfile {
  std::string name;
  Shape output;  // [C, H, W] or [F]
  std::size_t params = 0;
  std::uint64_t macs = 0;
};

struct ModelProfile {
  std::vector<LayerProfile> layers;
  std::size_t params = 0;
  std::uint64_t macs = 0;
  std::uint64_t flops() const { return 2 * macs; }
};

// Analytic per-layer accounting at `input_size` (0: the configured size).
// conv: K*K*(Cin/groups)*Cout*H'*W' MACs; linear: Fin*Fout; VM layer: the
// two projections, three multiply-adds per scan step and state, and the
// skip term, for each of the four directions. Norms, activations and
// pooling are not counted.
ModelProfile profile_model(const ModelConfig& cfg, std::size_t input_size = 0);

struct FlopCount {
  std::uint64_t macs = 0;
  std::uint64_t flops = 0;
};

template <typename T>
FlopCount count_flops(const Model<T>& model, std::size_t input_size = 0);

// Grad-CAM weights from a feature map [C, h, w] and the gradient of the
// target logit with respect to it: relu(sum_c mean(grad_c) * A_c), scaled
// to max 1; an all-zero map stays zero.
template <typename T>
Tensor<T> cam_from_gradients(const Tensor<T>& features, const Tensor<T>& grads);

// image [C, S, S] or [1, C, S, S] -> heatmap [S/16, S/16], infer-mode BN.
template <typename T>
Tensor<T> grad_cam(Model<T>& model, const Tensor<T>& image, int target_class);

// Bilinear resize of a [h, w] map (align_corners = false).
template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& map, std::size_t out_h,
                            std::size_t out_w);

}  // namespace mpox

#endif  // MPOX_MODEL_H_
