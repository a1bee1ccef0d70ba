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

// Raw-pointer compute kernels shared by the differentiable ops. All
// matrices are row-major with explicit leading dimensions; every routine
// accumulates into its output.

#ifndef MPOX_SRC_KERNELS_H_
#define MPOX_SRC_KERNELS_H_

#include <cstddef>

namespace mpox::kernels {

// C[M,N] += A[M,K] * B[K,N]
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc);

// C[M,N] += A[M,K] * B[N,K]^T
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a,
             std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc);

// C[M,N] += A[K,M]^T * B[K,N]
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc);

struct ConvGeometry {
  std::size_t batch, in_channels, in_h, in_w;
  std::size_t out_channels, kernel_h, kernel_w;
  std::size_t stride, padding, groups;
  std::size_t out_h, out_w;

  std::size_t in_per_group() const { return in_channels / groups; }
  std::size_t out_per_group() const { return out_channels / groups; }
  bool pointwise() const {
    return kernel_h == 1 && kernel_w == 1 && stride == 1 && padding == 0;
  }
  bool depthwise() const {
    return groups == in_channels && groups == out_channels;
  }
};

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w,
                    const T* bias, T* y);

// Any of gx / gw / gb may be null when that gradient is not wanted.
template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w,
                     const T* gy, T* gx, T* gw, T* gb);

}  // namespace mpox::kernels

#endif  // MPOX_SRC_KERNELS_H_
