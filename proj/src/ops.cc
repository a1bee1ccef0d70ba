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

#include "mpox/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kernels.h"

namespace mpox::ops {

namespace {

template <typename T>
void require_rank(const Var<T>& x, std::size_t rank, const char* op) {
  if (x.shape().size() != rank) {
    throw DimensionError(std::string(op) + " expects rank " +
                         std::to_string(rank) + " input, got " +
                         shape_str(x.shape()));
  }
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + " shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <typename T>
void require_vector(const Var<T>& v, std::size_t n, const char* what) {
  if (v.shape() != Shape{n}) {
    throw DimensionError(std::string(what) + " must have shape [" +
                         std::to_string(n) + "], got " + shape_str(v.shape()));
  }
}

template <typename T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
T softplus_scalar(T x) {
  if (x > T(20)) return x;
  return std::log1p(std::exp(x));
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
              const Conv2dOptions& opt) {
  require_rank(x, 4, "conv2d");
  require_rank(weight, 4, "conv2d weight");
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (opt.groups == 0 || xs[1] % opt.groups != 0 || ws[0] % opt.groups != 0) {
    throw ConfigError("conv2d: groups=" + std::to_string(opt.groups) +
                      " must divide in_channels=" + std::to_string(xs[1]) +
                      " and out_channels=" + std::to_string(ws[0]));
  }
  if (opt.stride == 0) throw ConfigError("conv2d: stride must be >= 1");
  if (ws[1] != xs[1] / opt.groups) {
    throw DimensionError("conv2d: weight " + shape_str(ws) +
                         " does not match input " + shape_str(xs) +
                         " with groups=" + std::to_string(opt.groups));
  }
  if (xs[2] + 2 * opt.padding < ws[2] || xs[3] + 2 * opt.padding < ws[3]) {
    throw DimensionError("conv2d: kernel larger than padded input");
  }
  if (bias.defined()) require_vector(bias, ws[0], "conv2d bias");

  kernels::ConvGeometry g{};
  g.batch = xs[0];
  g.in_channels = xs[1];
  g.in_h = xs[2];
  g.in_w = xs[3];
  g.out_channels = ws[0];
  g.kernel_h = ws[2];
  g.kernel_w = ws[3];
  g.stride = opt.stride;
  g.padding = opt.padding;
  g.groups = opt.groups;
  g.out_h = (g.in_h + 2 * g.padding - g.kernel_h) / g.stride + 1;
  g.out_w = (g.in_w + 2 * g.padding - g.kernel_w) / g.stride + 1;

  Tensor<T> y({g.batch, g.out_channels, g.out_h, g.out_w});
  kernels::conv2d_forward(g, x.value().raw(), weight.value().raw(),
                          bias.defined() ? bias.value().raw() : nullptr,
                          y.raw());

  std::vector<Var<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return record<T>(std::move(y), inputs, [g](Node<T>& node) {
    Tensor<T>* gx = input_grad(node, 0);
    Tensor<T>* gw = input_grad(node, 1);
    Tensor<T>* gb = node.inputs.size() > 2 ? input_grad(node, 2) : nullptr;
    kernels::conv2d_backward(g, node.inputs[0]->value.raw(),
                             node.inputs[1]->value.raw(), node.grad.raw(),
                             gx ? gx->raw() : nullptr,
                             gw ? gw->raw() : nullptr,
                             gb ? gb->raw() : nullptr);
  });
}

template <typename T>
Var<T> batch_norm2d(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                    BatchNormStats<T>& stats, const BatchNormOptions& opt) {
  require_rank(x, 4, "batch_norm2d");
  const std::size_t n = x.dim(0), c = x.dim(1);
  const std::size_t plane = x.dim(2) * x.dim(3);
  require_vector(gamma, c, "batch_norm2d gamma");
  require_vector(beta, c, "batch_norm2d beta");
  if (stats.running_mean.shape() != Shape{c} ||
      stats.running_var.shape() != Shape{c}) {
    throw DimensionError("batch_norm2d running statistics do not match " +
                         std::to_string(c) + " channels");
  }
  const std::size_t count = n * plane;
  if (opt.training && count < 2) {
    throw DimensionError(
        "batch_norm2d in training mode needs at least 2 values per channel");
  }

  const T* xv = x.value().raw();
  Tensor<T> xhat(x.shape());
  Tensor<T> inv_std({c});
  Tensor<T> y(x.shape());
  const T eps = static_cast<T>(opt.eps);
  for (std::size_t ch = 0; ch < c; ++ch) {
    T mean, var;
    if (opt.training) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = xv + (b * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      const double m = s / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = xv + (b * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = p[i] - m;
          sq += d * d;
        }
      }
      mean = static_cast<T>(m);
      var = static_cast<T>(sq / static_cast<double>(count));
      const T mom = static_cast<T>(opt.momentum);
      const T unbiased = static_cast<T>(sq / static_cast<double>(count - 1));
      stats.running_mean[ch] = (T(1) - mom) * stats.running_mean[ch] + mom * mean;
      stats.running_var[ch] = (T(1) - mom) * stats.running_var[ch] + mom * unbiased;
    } else {
      mean = stats.running_mean[ch];
      var = stats.running_var[ch];
    }
    const T inv = T(1) / std::sqrt(var + eps);
    inv_std[ch] = inv;
    const T gm = gamma.value()[ch], bt = beta.value()[ch];
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const T h = (xv[off + i] - mean) * inv;
        xhat[off + i] = h;
        y[off + i] = gm * h + bt;
      }
    }
  }

  const bool training = opt.training;
  return record<T>(
      std::move(y), {x, gamma, beta},
      [n, c, plane, training, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Node<T>& node) {
        const T* gy = node.grad.raw();
        const T* gm = node.inputs[1]->value.raw();
        Tensor<T>* gx = input_grad(node, 0);
        Tensor<T>* ggamma = input_grad(node, 1);
        Tensor<T>* gbeta = input_grad(node, 2);
        const T count = static_cast<T>(n * plane);
        for (std::size_t ch = 0; ch < c; ++ch) {
          T sum_gy = T(0), sum_gy_xhat = T(0);
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = (b * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_gy += gy[off + i];
              sum_gy_xhat += gy[off + i] * xhat[off + i];
            }
          }
          if (ggamma) (*ggamma)[ch] += sum_gy_xhat;
          if (gbeta) (*gbeta)[ch] += sum_gy;
          if (!gx) continue;
          const T scale = gm[ch] * inv_std[ch];
          for (std::size_t b = 0; b < n; ++b) {
            const std::size_t off = (b * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              if (training) {
                (*gx)[off + i] +=
                    scale * (gy[off + i] - sum_gy / count -
                             xhat[off + i] * sum_gy_xhat / count);
              } else {
                (*gx)[off + i] += scale * gy[off + i];
              }
            }
          }
        }
      });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  double eps) {
  if (x.shape().empty()) throw DimensionError("layer_norm on a scalar");
  const std::size_t c = x.shape().back();
  const std::size_t rows = x.value().numel() / c;
  require_vector(gamma, c, "layer_norm gamma");
  require_vector(beta, c, "layer_norm beta");
  const T* xv = x.value().raw();
  const T* gm = gamma.value().raw();
  const T* bt = beta.value().raw();
  Tensor<T> y(x.shape());
  Tensor<T> xhat(x.shape());
  Tensor<T> inv_std({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    const T* p = xv + r * c;
    T mean = T(0);
    for (std::size_t i = 0; i < c; ++i) mean += p[i];
    mean /= static_cast<T>(c);
    T var = T(0);
    for (std::size_t i = 0; i < c; ++i) var += (p[i] - mean) * (p[i] - mean);
    var /= static_cast<T>(c);
    const T inv = T(1) / std::sqrt(var + static_cast<T>(eps));
    inv_std[r] = inv;
    for (std::size_t i = 0; i < c; ++i) {
      const T h = (p[i] - mean) * inv;
      xhat[r * c + i] = h;
      y[r * c + i] = gm[i] * h + bt[i];
    }
  }
  return record<T>(
      std::move(y), {x, gamma, beta},
      [rows, c, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Node<T>& node) {
        const T* gy = node.grad.raw();
        const T* gm = node.inputs[1]->value.raw();
        Tensor<T>* gx = input_grad(node, 0);
        Tensor<T>* ggamma = input_grad(node, 1);
        Tensor<T>* gbeta = input_grad(node, 2);
        for (std::size_t r = 0; r < rows; ++r) {
          const T* g = gy + r * c;
          const T* h = xhat.raw() + r * c;
          T sum_g = T(0), sum_gh = T(0);
          for (std::size_t i = 0; i < c; ++i) {
            if (ggamma) (*ggamma)[i] += g[i] * h[i];
            if (gbeta) (*gbeta)[i] += g[i];
            const T gh = g[i] * gm[i];
            sum_g += gh;
            sum_gh += gh * h[i];
          }
          if (!gx) continue;
          const T inv = inv_std[r];
          const T cc = static_cast<T>(c);
          for (std::size_t i = 0; i < c; ++i) {
            const T gh = g[i] * gm[i];
            (*gx)[r * c + i] += inv * (gh - sum_g / cc - h[i] * sum_gh / cc);
          }
        }
      });
}

template <typename T>
Var<T> activation(Activation kind, const Var<T>& x) {
  const Tensor<T>& xv = x.value();
  Tensor<T> y(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) {
    const T v = xv[i];
    switch (kind) {
      case Activation::kSilu: y[i] = v * sigmoid_scalar(v); break;
      case Activation::kSigmoid: y[i] = sigmoid_scalar(v); break;
      case Activation::kSoftplus: y[i] = softplus_scalar(v); break;
      case Activation::kRelu: y[i] = v > T(0) ? v : T(0); break;
    }
  }
  return record<T>(std::move(y), {x}, [kind](Node<T>& node) {
    Tensor<T>* gx = input_grad(node, 0);
    if (!gx) return;
    const Tensor<T>& xv = node.inputs[0]->value;
    for (std::size_t i = 0; i < xv.numel(); ++i) {
      const T v = xv[i];
      T d = T(0);
      switch (kind) {
        case Activation::kSilu: {
          const T s = sigmoid_scalar(v);
          d = s * (T(1) + v * (T(1) - s));
          break;
        }
        case Activation::kSigmoid: {
          const T s = sigmoid_scalar(v);
          d = s * (T(1) - s);
          break;
        }
        case Activation::kSoftplus: d = sigmoid_scalar(v); break;
        case Activation::kRelu: d = v > T(0) ? T(1) : T(0); break;
      }
      (*gx)[i] += d * node.grad[i];
    }
  });
}

template <typename T>
Var<T> softmax_lastdim(const Var<T>& x) {
  if (x.shape().empty()) throw DimensionError("softmax on a scalar");
  const std::size_t k = x.shape().back();
  const std::size_t rows = x.value().numel() / k;
  Tensor<T> y(x.shape());
  const T* xv = x.value().raw();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* p = xv + r * k;
    const T mx = *std::max_element(p, p + k);
    T s = T(0);
    for (std::size_t i = 0; i < k; ++i) {
      y[r * k + i] = std::exp(p[i] - mx);
      s += y[r * k + i];
    }
    for (std::size_t i = 0; i < k; ++i) y[r * k + i] /= s;
  }
  Tensor<T> saved = y;
  return record<T>(std::move(y), {x},
                   [rows, k, saved = std::move(saved)](Node<T>& node) {
                     Tensor<T>* gx = input_grad(node, 0);
                     if (!gx) return;
                     for (std::size_t r = 0; r < rows; ++r) {
                       T dot = T(0);
                       for (std::size_t i = 0; i < k; ++i) {
                         dot += node.grad[r * k + i] * saved[r * k + i];
                       }
                       for (std::size_t i = 0; i < k; ++i) {
                         (*gx)[r * k + i] +=
                             saved[r * k + i] * (node.grad[r * k + i] - dot);
                       }
                     }
                   });
}

template <typename T>
Var<T> exp(const Var<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = std::exp(x.value()[i]);
  Tensor<T> saved = y;
  return record<T>(std::move(y), {x}, [saved = std::move(saved)](Node<T>& node) {
    if (Tensor<T>* gx = input_grad(node, 0)) {
      for (std::size_t i = 0; i < saved.numel(); ++i) {
        (*gx)[i] += node.grad[i] * saved[i];
      }
    }
  });
}

template <typename T>
Var<T> neg(const Var<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = -x.value()[i];
  return record<T>(std::move(y), {x}, [](Node<T>& node) {
    if (Tensor<T>* gx = input_grad(node, 0)) {
      for (std::size_t i = 0; i < gx->numel(); ++i) (*gx)[i] -= node.grad[i];
    }
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  require_rank(weight, 2, "linear weight");
  if (x.shape().empty()) throw DimensionError("linear on a scalar");
  const std::size_t fout = weight.dim(0), fin = weight.dim(1);
  if (x.shape().back() != fin) {
    throw DimensionError("linear: input " + shape_str(x.shape()) +
                         " does not match weight " +
                         shape_str(weight.shape()));
  }
  if (bias.defined()) require_vector(bias, fout, "linear bias");
  const std::size_t rows = x.value().numel() / fin;
  Shape out_shape = x.shape();
  out_shape.back() = fout;
  Tensor<T> y(out_shape);
  if (bias.defined()) {
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(bias.value().raw(), fout, y.raw() + r * fout);
    }
  }
  kernels::gemm_nt(rows, fout, fin, x.value().raw(), fin, weight.value().raw(),
                   fin, y.raw(), fout);
  std::vector<Var<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return record<T>(std::move(y), inputs, [rows, fin, fout](Node<T>& node) {
    const T* gy = node.grad.raw();
    if (Tensor<T>* gx = input_grad(node, 0)) {
      kernels::gemm_nn(rows, fin, fout, gy, fout, node.inputs[1]->value.raw(),
                       fin, gx->raw(), fin);
    }
    if (Tensor<T>* gw = input_grad(node, 1)) {
      kernels::gemm_tn(fout, fin, rows, gy, fout, node.inputs[0]->value.raw(),
                       fin, gw->raw(), fin);
    }
    if (node.inputs.size() > 2) {
      if (Tensor<T>* gb = input_grad(node, 2)) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < fout; ++j) (*gb)[j] += gy[r * fout + j];
        }
      }
    }
  });
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  require_rank(x, 4, "global_avg_pool");
  const std::size_t n = x.dim(0), c = x.dim(1);
  const std::size_t plane = x.dim(2) * x.dim(3);
  Tensor<T> y({n, c});
  for (std::size_t i = 0; i < n * c; ++i) {
    const T* p = x.value().raw() + i * plane;
    T s = T(0);
    for (std::size_t j = 0; j < plane; ++j) s += p[j];
    y[i] = s / static_cast<T>(plane);
  }
  return record<T>(std::move(y), {x}, [n, c, plane](Node<T>& node) {
    Tensor<T>* gx = input_grad(node, 0);
    if (!gx) return;
    const T inv = T(1) / static_cast<T>(plane);
    for (std::size_t i = 0; i < n * c; ++i) {
      const T g = node.grad[i] * inv;
      T* p = gx->raw() + i * plane;
      for (std::size_t j = 0; j < plane; ++j) p[j] += g;
    }
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> y(a.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) {
    y[i] = a.value()[i] + b.value()[i];
  }
  return record<T>(std::move(y), {a, b}, [](Node<T>& node) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (Tensor<T>* g = input_grad(node, k)) {
        for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += node.grad[i];
      }
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> y(a.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) {
    y[i] = a.value()[i] * b.value()[i];
  }
  return record<T>(std::move(y), {a, b}, [](Node<T>& node) {
    const Tensor<T>& av = node.inputs[0]->value;
    const Tensor<T>& bv = node.inputs[1]->value;
    if (Tensor<T>* ga = input_grad(node, 0)) {
      for (std::size_t i = 0; i < ga->numel(); ++i) {
        (*ga)[i] += node.grad[i] * bv[i];
      }
    }
    if (Tensor<T>* gb = input_grad(node, 1)) {
      for (std::size_t i = 0; i < gb->numel(); ++i) {
        (*gb)[i] += node.grad[i] * av[i];
      }
    }
  });
}

template <typename T>
Var<T> scale_channels(const Var<T>& x, const Var<T>& s) {
  require_rank(x, 4, "scale_channels");
  const std::size_t n = x.dim(0), c = x.dim(1);
  const std::size_t plane = x.dim(2) * x.dim(3);
  if (s.shape() != Shape{n, c}) {
    throw DimensionError("scale_channels: scale " + shape_str(s.shape()) +
                         " does not match " + shape_str(x.shape()));
  }
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < n * c; ++i) {
    const T sv = s.value()[i];
    for (std::size_t j = 0; j < plane; ++j) {
      y[i * plane + j] = x.value()[i * plane + j] * sv;
    }
  }
  return record<T>(std::move(y), {x, s}, [n, c, plane](Node<T>& node) {
    const Tensor<T>& xv = node.inputs[0]->value;
    const Tensor<T>& sv = node.inputs[1]->value;
    Tensor<T>* gx = input_grad(node, 0);
    Tensor<T>* gs = input_grad(node, 1);
    for (std::size_t i = 0; i < n * c; ++i) {
      T acc = T(0);
      for (std::size_t j = 0; j < plane; ++j) {
        const T g = node.grad[i * plane + j];
        if (gx) (*gx)[i * plane + j] += g * sv[i];
        acc += g * xv[i * plane + j];
      }
      if (gs) (*gs)[i] += acc;
    }
  });
}

namespace {

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw DimensionError("concat axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != first.size()) throw DimensionError("concat rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) {
        throw DimensionError("concat shape mismatch " + shape_str(first) +
                             " vs " + shape_str(s));
      }
    }
    sizes.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  const AxisSplit sp = split_at(first, axis);
  const std::size_t total = out_shape[axis];
  Tensor<T> y(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const T* src = parts[k].value().raw();
    const std::size_t block = sizes[k] * sp.inner;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(src + o * block, block,
                  y.raw() + (o * total + offset) * sp.inner);
    }
    offset += sizes[k];
  }
  return record<T>(std::move(y), parts, [sp, total, sizes](Node<T>& node) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      const std::size_t block = sizes[k] * sp.inner;
      if (Tensor<T>* g = input_grad(node, k)) {
        for (std::size_t o = 0; o < sp.outer; ++o) {
          const T* src = node.grad.raw() + (o * total + offset) * sp.inner;
          T* dst = g->raw() + o * block;
          for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      }
      offset += sizes[k];
    }
  });
}

template <typename T>
Var<T> slice(const Var<T>& x, std::size_t axis, std::size_t begin,
             std::size_t count) {
  const Shape& s = x.shape();
  if (axis >= s.size() || count == 0 || begin + count > s[axis]) {
    throw DimensionError("slice [" + std::to_string(begin) + ", +" +
                         std::to_string(count) + ") out of range on axis " +
                         std::to_string(axis) + " of " + shape_str(s));
  }
  const AxisSplit sp = split_at(s, axis);
  const std::size_t total = s[axis];
  Shape out_shape = s;
  out_shape[axis] = count;
  Tensor<T> y(out_shape);
  const std::size_t block = count * sp.inner;
  for (std::size_t o = 0; o < sp.outer; ++o) {
    std::copy_n(x.value().raw() + (o * total + begin) * sp.inner, block,
                y.raw() + o * block);
  }
  return record<T>(std::move(y), {x},
                   [sp, total, begin, block](Node<T>& node) {
                     Tensor<T>* g = input_grad(node, 0);
                     if (!g) return;
                     for (std::size_t o = 0; o < sp.outer; ++o) {
                       T* dst = g->raw() + (o * total + begin) * sp.inner;
                       const T* src = node.grad.raw() + o * block;
                       for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                     }
                   });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Tensor<T> y = x.value().reshaped(std::move(shape));
  return record<T>(std::move(y), {x}, [](Node<T>& node) {
    if (Tensor<T>* g = input_grad(node, 0)) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += node.grad[i];
    }
  });
}

template <typename T>
Var<T> nchw_to_tokens(const Var<T>& x) {
  require_rank(x, 4, "nchw_to_tokens");
  const std::size_t n = x.dim(0), c = x.dim(1);
  const std::size_t plane = x.dim(2) * x.dim(3);
  Tensor<T> y({n, plane, c});
  const T* xv = x.value().raw();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t p = 0; p < plane; ++p) {
        y[(b * plane + p) * c + ch] = xv[(b * c + ch) * plane + p];
      }
    }
  }
  return record<T>(std::move(y), {x}, [n, c, plane](Node<T>& node) {
    Tensor<T>* g = input_grad(node, 0);
    if (!g) return;
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t p = 0; p < plane; ++p) {
          (*g)[(b * c + ch) * plane + p] += node.grad[(b * plane + p) * c + ch];
        }
      }
    }
  });
}

template <typename T>
Var<T> tokens_to_nchw(const Var<T>& x, std::size_t h, std::size_t w) {
  require_rank(x, 3, "tokens_to_nchw");
  const std::size_t n = x.dim(0), plane = x.dim(1), c = x.dim(2);
  if (plane != h * w) {
    throw DimensionError("tokens_to_nchw: " + std::to_string(plane) +
                         " tokens cannot form a " + std::to_string(h) + "x" +
                         std::to_string(w) + " map");
  }
  Tensor<T> y({n, c, h, w});
  const T* xv = x.value().raw();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t p = 0; p < plane; ++p) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        y[(b * c + ch) * plane + p] = xv[(b * plane + p) * c + ch];
      }
    }
  }
  return record<T>(std::move(y), {x}, [n, c, plane](Node<T>& node) {
    Tensor<T>* g = input_grad(node, 0);
    if (!g) return;
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t p = 0; p < plane; ++p) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          (*g)[(b * plane + p) * c + ch] += node.grad[(b * c + ch) * plane + p];
        }
      }
    }
  });
}

template <typename T>
Var<T> gather_rows(const Var<T>& x, const std::vector<std::size_t>& order) {
  require_rank(x, 3, "gather_rows");
  const std::size_t n = x.dim(0), len = x.dim(1), c = x.dim(2);
  if (order.size() != len) {
    throw DimensionError("gather_rows: order has " +
                         std::to_string(order.size()) + " entries for " +
                         std::to_string(len) + " rows");
  }
  std::vector<bool> seen(len, false);
  for (std::size_t idx : order) {
    if (idx >= len || seen[idx]) {
      throw DimensionError("gather_rows: order is not a permutation");
    }
    seen[idx] = true;
  }
  Tensor<T> y(x.shape());
  const T* xv = x.value().raw();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t i = 0; i < len; ++i) {
      std::copy_n(xv + (b * len + order[i]) * c, c, y.raw() + (b * len + i) * c);
    }
  }
  return record<T>(std::move(y), {x}, [n, len, c, order](Node<T>& node) {
    Tensor<T>* g = input_grad(node, 0);
    if (!g) return;
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t i = 0; i < len; ++i) {
        T* dst = g->raw() + (b * len + order[i]) * c;
        const T* src = node.grad.raw() + (b * len + i) * c;
        for (std::size_t k = 0; k < c; ++k) dst[k] += src[k];
      }
    }
  });
}

template <typename T>
Var<T> channel_conv1d(const Var<T>& x, const Var<T>& w) {
  require_rank(x, 2, "channel_conv1d");
  require_rank(w, 1, "channel_conv1d kernel");
  const std::size_t n = x.dim(0), c = x.dim(1), k = w.dim(0);
  if (k % 2 == 0) {
    throw ConfigError("channel_conv1d kernel size must be odd, got " +
                      std::to_string(k));
  }
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(k / 2);
  const std::ptrdiff_t cc = static_cast<std::ptrdiff_t>(c);
  Tensor<T> y({n, c});
  const T* xv = x.value().raw();
  const T* wv = w.value().raw();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::ptrdiff_t ch = 0; ch < cc; ++ch) {
      T acc = T(0);
      for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(k); ++j) {
        const std::ptrdiff_t src = ch + j - r;
        if (src >= 0 && src < cc) acc += wv[j] * xv[b * c + src];
      }
      y[b * c + ch] = acc;
    }
  }
  return record<T>(std::move(y), {x, w}, [n, c, k, r](Node<T>& node) {
    const T* xv = node.inputs[0]->value.raw();
    const T* wv = node.inputs[1]->value.raw();
    Tensor<T>* gx = input_grad(node, 0);
    Tensor<T>* gw = input_grad(node, 1);
    const std::ptrdiff_t cc = static_cast<std::ptrdiff_t>(c);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::ptrdiff_t ch = 0; ch < cc; ++ch) {
        const T g = node.grad[b * c + ch];
        for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(k); ++j) {
          const std::ptrdiff_t src = ch + j - r;
          if (src < 0 || src >= cc) continue;
          if (gx) (*gx)[b * c + src] += g * wv[j];
          if (gw) (*gw)[j] += g * xv[b * c + src];
        }
      }
    }
  });
}

template <typename T>
Var<T> cross_entropy(const Var<T>& logits, const std::vector<int>& targets) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (targets.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(n) + " rows");
  }
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= k) {
      throw DomainError("cross_entropy: target " + std::to_string(t) +
                        " outside [0, " + std::to_string(k) + ")");
    }
  }
  Tensor<T> probs({n, k});
  T loss = T(0);
  const T* lv = logits.value().raw();
  for (std::size_t r = 0; r < n; ++r) {
    const T* p = lv + r * k;
    const T mx = *std::max_element(p, p + k);
    T s = T(0);
    for (std::size_t i = 0; i < k; ++i) {
      probs[r * k + i] = std::exp(p[i] - mx);
      s += probs[r * k + i];
    }
    for (std::size_t i = 0; i < k; ++i) probs[r * k + i] /= s;
    loss += (std::log(s) + mx) - p[targets[r]];
  }
  Tensor<T> y({1}, loss / static_cast<T>(n));
  return record<T>(
      std::move(y), {logits},
      [n, k, targets, probs = std::move(probs)](Node<T>& node) {
        Tensor<T>* g = input_grad(node, 0);
        if (!g) return;
        const T scale = node.grad[0] / static_cast<T>(n);
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t i = 0; i < k; ++i) {
            const T onehot =
                static_cast<std::size_t>(targets[r]) == i ? T(1) : T(0);
            (*g)[r * k + i] += scale * (probs[r * k + i] - onehot);
          }
        }
      });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T s = T(0);
  for (T v : x.value().data()) s += v;
  return record<T>(Tensor<T>({1}, s), {x}, [](Node<T>& node) {
    if (Tensor<T>* g = input_grad(node, 0)) {
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += node.grad[0];
    }
  });
}

template <typename T>
Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& weights) {
  if (weights.shape() != x.shape()) {
    throw DimensionError("weighted_sum weights " + shape_str(weights.shape()) +
                         " do not match " + shape_str(x.shape()));
  }
  T s = T(0);
  for (std::size_t i = 0; i < weights.numel(); ++i) {
    s += x.value()[i] * weights[i];
  }
  return record<T>(Tensor<T>({1}, s), {x}, [weights](Node<T>& node) {
    if (Tensor<T>* g = input_grad(node, 0)) {
      for (std::size_t i = 0; i < g->numel(); ++i) {
        (*g)[i] += node.grad[0] * weights[i];
      }
    }
  });
}

#define MPOX_INSTANTIATE(T)                                                   \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&,         \
                         const Conv2dOptions&);                               \
  template Var<T> batch_norm2d(const Var<T>&, const Var<T>&, const Var<T>&,   \
                               BatchNormStats<T>&, const BatchNormOptions&);  \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&,     \
                             double);                                         \
  template Var<T> activation(Activation, const Var<T>&);                      \
  template Var<T> softmax_lastdim(const Var<T>&);                             \
  template Var<T> exp(const Var<T>&);                                         \
  template Var<T> neg(const Var<T>&);                                         \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);        \
  template Var<T> global_avg_pool(const Var<T>&);                             \
  template Var<T> add(const Var<T>&, const Var<T>&);                          \
  template Var<T> mul(const Var<T>&, const Var<T>&);                          \
  template Var<T> scale_channels(const Var<T>&, const Var<T>&);               \
  template Var<T> concat(const std::vector<Var<T>>&, std::size_t);            \
  template Var<T> slice(const Var<T>&, std::size_t, std::size_t,              \
                        std::size_t);                                         \
  template Var<T> reshape(const Var<T>&, Shape);                              \
  template Var<T> nchw_to_tokens(const Var<T>&);                              \
  template Var<T> tokens_to_nchw(const Var<T>&, std::size_t, std::size_t);    \
  template Var<T> gather_rows(const Var<T>&, const std::vector<std::size_t>&); \
  template Var<T> channel_conv1d(const Var<T>&, const Var<T>&);               \
  template Var<T> cross_entropy(const Var<T>&, const std::vector<int>&);      \
  template Var<T> sum(const Var<T>&);                                         \
  template Var<T> weighted_sum(const Var<T>&, const Tensor<T>&);

MPOX_INSTANTIATE(float)
MPOX_INSTANTIATE(double)

#undef MPOX_INSTANTIATE

}  // namespace mpox::ops
