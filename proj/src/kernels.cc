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

#include "kernels.h"

#include <algorithm>
#include <vector>

namespace mpox::kernels {

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    const T* arow = a + i * lda;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a,
             std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * lda;
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b + j * ldb;
      T acc = T(0);
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * ldc + j] += acc;
    }
  }
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a + p * lda;
    const T* brow = b + p * ldb;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      T* crow = c + i * ldc;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

namespace {

// col [Cg*Kh*Kw, Ho*Wo] for one group of one image; x points at the group's
// first input channel.
template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* col) {
  const std::size_t plane = g.out_h * g.out_w;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.padding);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_per_group(); ++c) {
    const T* xc = x + c * g.in_h * g.in_w;
    for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel_w; ++kj, ++row) {
        T* dst = col + row * plane;
        for (std::size_t oi = 0; oi < g.out_h; ++oi) {
          const std::ptrdiff_t ii =
              static_cast<std::ptrdiff_t>(oi * g.stride + ki) - pad;
          T* drow = dst + oi * g.out_w;
          if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(g.in_h)) {
            std::fill(drow, drow + g.out_w, T(0));
            continue;
          }
          const T* srow = xc + static_cast<std::size_t>(ii) * g.in_w;
          for (std::size_t oj = 0; oj < g.out_w; ++oj) {
            const std::ptrdiff_t jj =
                static_cast<std::ptrdiff_t>(oj * g.stride + kj) - pad;
            drow[oj] = (jj < 0 || jj >= static_cast<std::ptrdiff_t>(g.in_w))
                           ? T(0)
                           : srow[jj];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* col, T* gx) {
  const std::size_t plane = g.out_h * g.out_w;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.padding);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_per_group(); ++c) {
    T* gxc = gx + c * g.in_h * g.in_w;
    for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel_w; ++kj, ++row) {
        const T* src = col + row * plane;
        for (std::size_t oi = 0; oi < g.out_h; ++oi) {
          const std::ptrdiff_t ii =
              static_cast<std::ptrdiff_t>(oi * g.stride + ki) - pad;
          if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
          T* grow = gxc + static_cast<std::size_t>(ii) * g.in_w;
          const T* srow = src + oi * g.out_w;
          for (std::size_t oj = 0; oj < g.out_w; ++oj) {
            const std::ptrdiff_t jj =
                static_cast<std::ptrdiff_t>(oj * g.stride + kj) - pad;
            if (jj >= 0 && jj < static_cast<std::ptrdiff_t>(g.in_w)) {
              grow[jj] += srow[oj];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void depthwise_forward(const ConvGeometry& g, const T* x, const T* w, T* y) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.padding);
  const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(g.in_h);
  const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(g.in_w);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      const T* xc = x + (n * g.in_channels + c) * g.in_h * g.in_w;
      const T* wc = w + c * g.kernel_h * g.kernel_w;
      T* yc = y + (n * g.out_channels + c) * g.out_h * g.out_w;
      for (std::size_t oi = 0; oi < g.out_h; ++oi) {
        for (std::size_t oj = 0; oj < g.out_w; ++oj) {
          T acc = T(0);
          for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
            const std::ptrdiff_t ii =
                static_cast<std::ptrdiff_t>(oi * g.stride + ki) - pad;
            if (ii < 0 || ii >= ih) continue;
            for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
              const std::ptrdiff_t jj =
                  static_cast<std::ptrdiff_t>(oj * g.stride + kj) - pad;
              if (jj < 0 || jj >= iw) continue;
              acc += wc[ki * g.kernel_w + kj] * xc[ii * iw + jj];
            }
          }
          yc[oi * g.out_w + oj] += acc;
        }
      }
    }
  }
}

template <typename T>
void depthwise_backward(const ConvGeometry& g, const T* x, const T* w,
                        const T* gy, T* gx, T* gw) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.padding);
  const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(g.in_h);
  const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(g.in_w);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      const std::size_t xoff = (n * g.in_channels + c) * g.in_h * g.in_w;
      const T* xc = x + xoff;
      const T* wc = w + c * g.kernel_h * g.kernel_w;
      const T* gyc = gy + (n * g.out_channels + c) * g.out_h * g.out_w;
      T* gwc = gw ? gw + c * g.kernel_h * g.kernel_w : nullptr;
      T* gxc = gx ? gx + xoff : nullptr;
      for (std::size_t oi = 0; oi < g.out_h; ++oi) {
        for (std::size_t oj = 0; oj < g.out_w; ++oj) {
          const T go = gyc[oi * g.out_w + oj];
          if (go == T(0)) continue;
          for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
            const std::ptrdiff_t ii =
                static_cast<std::ptrdiff_t>(oi * g.stride + ki) - pad;
            if (ii < 0 || ii >= ih) continue;
            for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
              const std::ptrdiff_t jj =
                  static_cast<std::ptrdiff_t>(oj * g.stride + kj) - pad;
              if (jj < 0 || jj >= iw) continue;
              const std::size_t widx = ki * g.kernel_w + kj;
              if (gwc) gwc[widx] += go * xc[ii * iw + jj];
              if (gxc) gxc[ii * iw + jj] += go * wc[widx];
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w,
                    const T* bias, T* y) {
  const std::size_t plane = g.out_h * g.out_w;
  if (g.depthwise()) {
    depthwise_forward(g, x, w, y);
  } else {
    const std::size_t cin_g = g.in_per_group();
    const std::size_t cout_g = g.out_per_group();
    const std::size_t ck = cin_g * g.kernel_h * g.kernel_w;
    std::vector<T> col;
    if (!g.pointwise()) col.resize(ck * plane);
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t grp = 0; grp < g.groups; ++grp) {
        const T* xg = x + (n * g.in_channels + grp * cin_g) * g.in_h * g.in_w;
        const T* src = xg;
        if (!g.pointwise()) {
          im2col(g, xg, col.data());
          src = col.data();
        }
        T* yg = y + (n * g.out_channels + grp * cout_g) * plane;
        gemm_nn(cout_g, plane, ck, w + grp * cout_g * ck, ck, src, plane, yg,
                plane);
      }
    }
  }
  if (bias) {
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t c = 0; c < g.out_channels; ++c) {
        T* yc = y + (n * g.out_channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) yc[i] += bias[c];
      }
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w,
                     const T* gy, T* gx, T* gw, T* gb) {
  const std::size_t plane = g.out_h * g.out_w;
  if (gb) {
    for (std::size_t n = 0; n < g.batch; ++n) {
      for (std::size_t c = 0; c < g.out_channels; ++c) {
        const T* gyc = gy + (n * g.out_channels + c) * plane;
        T acc = T(0);
        for (std::size_t i = 0; i < plane; ++i) acc += gyc[i];
        gb[c] += acc;
      }
    }
  }
  if (!gx && !gw) return;
  if (g.depthwise()) {
    depthwise_backward(g, x, w, gy, gx, gw);
    return;
  }
  const std::size_t cin_g = g.in_per_group();
  const std::size_t cout_g = g.out_per_group();
  const std::size_t ck = cin_g * g.kernel_h * g.kernel_w;
  std::vector<T> col;
  std::vector<T> gcol;
  if (!g.pointwise()) {
    if (gw) col.resize(ck * plane);
    if (gx) gcol.resize(ck * plane);
  }
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t grp = 0; grp < g.groups; ++grp) {
      const std::size_t xoff =
          (n * g.in_channels + grp * cin_g) * g.in_h * g.in_w;
      const T* gyg = gy + (n * g.out_channels + grp * cout_g) * plane;
      const T* wg = w + grp * cout_g * ck;
      if (gw) {
        const T* src = x + xoff;
        if (!g.pointwise()) {
          im2col(g, x + xoff, col.data());
          src = col.data();
        }
        gemm_nt(cout_g, ck, plane, gyg, plane, src, plane, gw + grp * cout_g * ck,
                ck);
      }
      if (gx) {
        if (g.pointwise()) {
          gemm_tn(ck, plane, cout_g, wg, ck, gyg, plane, gx + xoff, plane);
        } else {
          std::fill(gcol.begin(), gcol.end(), T(0));
          gemm_tn(ck, plane, cout_g, wg, ck, gyg, plane, gcol.data(), plane);
          col2im(g, gcol.data(), gx + xoff);
        }
      }
    }
  }
}

#define MPOX_INSTANTIATE(T)                                                   \
  template void gemm_nn<T>(std::size_t, std::size_t, std::size_t, const T*,   \
                           std::size_t, const T*, std::size_t, T*,            \
                           std::size_t);                                      \
  template void gemm_nt<T>(std::size_t, std::size_t, std::size_t, const T*,   \
                           std::size_t, const T*, std::size_t, T*,            \
                           std::size_t);                                      \
  template void gemm_tn<T>(std::size_t, std::size_t, std::size_t, const T*,   \
                           std::size_t, const T*, std::size_t, T*,            \
                           std::size_t);                                      \
  template void conv2d_forward<T>(const ConvGeometry&, const T*, const T*,    \
                                  const T*, T*);                              \
  template void conv2d_backward<T>(const ConvGeometry&, const T*, const T*,   \
                                   const T*, T*, T*, T*);

MPOX_INSTANTIATE(float)
MPOX_INSTANTIATE(double)

#undef MPOX_INSTANTIATE

}  // namespace mpox::kernels
