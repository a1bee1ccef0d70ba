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

// State-space machinery: zero-order-hold discretization, the discrete
// selective scan, its global-convolution form for time-invariant
// parameters, and the learned S6 block used by the vision layers.
//
// Diagonal A throughout, so every (channel, state) lane is a scalar
// recurrence h_t = a_t h_{t-1} + b_t x_t.

#ifndef MPOX_SSM_H_
#define MPOX_SSM_H_

#include <cstddef>
#include <string>

#include "mpox/autodiff.h"
#include "mpox/module.h"

namespace mpox::ssm {

template <typename T>
struct ZohScalar {
  T a_bar;
  T b_bar;
};

// Below this |delta * a| the input matrix uses delta * b * (1 + z/2).
inline constexpr double kZohTaylorThreshold = 1e-8;

// a < 0, delta > 0. Throws DomainError otherwise.
template <typename T>
ZohScalar<T> discretize_zoh(T a, T b, T delta);

// Input-dependent parameters of one sequence.
//   A      [D, N]  strictly negative
//   B, C   [L, N]
//   delta  [L, D]  strictly positive
//   D_skip [D]
template <typename T>
struct SsmParams {
  Tensor<T> A;
  Tensor<T> B;
  Tensor<T> C;
  Tensor<T> delta;
  Tensor<T> D_skip;
};

// A_bar, B_bar [L, D, N].
template <typename T>
struct DiscreteParams {
  Tensor<T> A_bar;
  Tensor<T> B_bar;
};

template <typename T>
DiscreteParams<T> discretize_zoh(const Tensor<T>& A, const Tensor<T>& B,
                                 const Tensor<T>& delta);

// x [L, D] -> y [L, D] with h_0 = 0 and y_t = C_t h_t + D_skip x_t.
// C [L, N], D_skip [D]. NumericError names the first non-finite step.
template <typename T>
Tensor<T> selective_scan(const Tensor<T>& x, const DiscreteParams<T>& disc,
                         const Tensor<T>& C, const Tensor<T>& D_skip);

// Discretizes on the fly; memory stays O(D N) regardless of L.
template <typename T>
Tensor<T> selective_scan(const Tensor<T>& x, const SsmParams<T>& params);

// K[k] = sum_n C[n] A_bar[n]^k B_bar[n] for k < L; A_bar, B_bar, C [N].
template <typename T>
Tensor<T> lti_scan_kernel(const Tensor<T>& A_bar, const Tensor<T>& B_bar,
                          const Tensor<T>& C, std::size_t L);

// Causal convolution y_t = sum_{k<=t} K[k] x[t-k]; x, K [L].
template <typename T>
Tensor<T> kernel_conv_apply(const Tensor<T>& x, const Tensor<T>& K);

// Differentiable batched scan with discretization fused in.
//   x, delta [Bt, L, D]; A [D, N]; B, C [Bt, L, N]; D_skip [D].
// Backward re-derives a_t and b_t from the stored states and accumulates
// gradients for all six inputs in one reverse sweep per lane.
template <typename T>
Var<T> selective_scan(const Var<T>& x, const Var<T>& delta, const Var<T>& A,
                      const Var<T>& B, const Var<T>& C, const Var<T>& D_skip);

struct S6Config {
  std::size_t channels = 16;
  std::size_t state_size = 2;
  std::size_t dt_rank = 8;
  double dt_min = 1e-3;
  double dt_max = 0.1;
};

// Selective SSM: x_t -> (dt_t, B_t, C_t) by one bias-free projection,
// delta_t = softplus(dt_proj(dt_t)), A = -exp(A_log).
template <typename T>
class S6 {
 public:
  S6(const S6Config& cfg, Rng& rng);

  // x [Bt, L, D] or [L, D]; output has the input's shape.
  Var<T> forward(const Var<T>& x) const;

  void collect(const std::string& prefix, ParamList<T>& out);
  const S6Config& config() const { return cfg_; }

  Var<T> A_log;    // [D, N]
  Var<T> x_proj;   // [R + 2N, D]: rows dt | B | C
  Var<T> dt_proj;  // [D, R]
  Var<T> dt_bias;  // [D]
  Var<T> D_skip;   // [D]

 private:
  S6Config cfg_;
};

}  // namespace mpox::ssm

#endif  // MPOX_SSM_H_
