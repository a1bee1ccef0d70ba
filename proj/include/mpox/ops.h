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

// Differentiable tensor operations. Each op is a pure function of its
// inputs (batch_norm2d in training mode additionally updates the running
// statistics it is handed) and records an analytic backward on the tape.
//
// Output layouts are row-major: NCHW for feature maps, [N, L, C] for token
// sequences, [N, F] for features.

#ifndef MPOX_OPS_H_
#define MPOX_OPS_H_

#include <cstddef>
#include <vector>

#include "mpox/autodiff.h"

namespace mpox::ops {

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;
};

// x [N, Cin, H, W], weight [Cout, Cin/groups, Kh, Kw], bias [Cout] or
// undefined. Output [N, Cout, (H + 2p - Kh)/s + 1, (W + 2p - Kw)/s + 1].
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
              const Conv2dOptions& opt);

template <typename T>
struct BatchNormStats {
  Tensor<T> running_mean;
  Tensor<T> running_var;

  explicit BatchNormStats(std::size_t channels = 1)
      : running_mean({channels}, T(0)), running_var({channels}, T(1)) {}
};

struct BatchNormOptions {
  bool training = false;
  double momentum = 0.1;
  double eps = 1e-5;
};

// Per-channel normalization of [N, C, H, W]. In training mode the batch
// statistics are used and `stats` is updated with the unbiased variance.
template <typename T>
Var<T> batch_norm2d(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                    BatchNormStats<T>& stats, const BatchNormOptions& opt);

// Normalizes over the last axis.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  double eps = 1e-5);

enum class Activation { kSilu, kSigmoid, kSoftplus, kRelu };

template <typename T>
Var<T> activation(Activation kind, const Var<T>& x);

template <typename T>
Var<T> silu(const Var<T>& x) { return activation(Activation::kSilu, x); }
template <typename T>
Var<T> sigmoid(const Var<T>& x) { return activation(Activation::kSigmoid, x); }
template <typename T>
Var<T> softplus(const Var<T>& x) {
  return activation(Activation::kSoftplus, x);
}
template <typename T>
Var<T> relu(const Var<T>& x) { return activation(Activation::kRelu, x); }

template <typename T>
Var<T> softmax_lastdim(const Var<T>& x);

template <typename T>
Var<T> exp(const Var<T>& x);

template <typename T>
Var<T> neg(const Var<T>& x);

// x [..., Fin], weight [Fout, Fin], bias [Fout] or undefined.
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

// [N, C, H, W] -> [N, C]
template <typename T>
Var<T> global_avg_pool(const Var<T>& x);

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);

// x [N, C, H, W] scaled by s [N, C] broadcast over space.
template <typename T>
Var<T> scale_channels(const Var<T>& x, const Var<T>& s);

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis);

template <typename T>
Var<T> slice(const Var<T>& x, std::size_t axis, std::size_t begin,
             std::size_t count);

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape);

// [N, C, H, W] -> [N, H*W, C] and back.
template <typename T>
Var<T> nchw_to_tokens(const Var<T>& x);
template <typename T>
Var<T> tokens_to_nchw(const Var<T>& x, std::size_t h, std::size_t w);

// y[n, i, :] = x[n, order[i], :] for x [N, L, C]; `order` is a permutation.
template <typename T>
Var<T> gather_rows(const Var<T>& x, const std::vector<std::size_t>& order);

// Zero-padded 1-D convolution along the channel axis of x [N, C] with an
// odd-length kernel w [k]; output [N, C].
template <typename T>
Var<T> channel_conv1d(const Var<T>& x, const Var<T>& w);

// Mean over the batch of -log softmax(logits)[target]; output shape [1].
template <typename T>
Var<T> cross_entropy(const Var<T>& logits, const std::vector<int>& targets);

template <typename T>
Var<T> sum(const Var<T>& x);

// sum(x * weights) with constant weights of x's shape; output [1].
template <typename T>
Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& weights);

}  // namespace mpox::ops

#endif  // MPOX_OPS_H_
