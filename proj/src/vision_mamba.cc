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

#include "mpox/vision_mamba.h"

#include <algorithm>

#include "mpox/ops.h"

namespace mpox::vm {

const char* direction_name(ScanDirection dir) {
  switch (dir) {
    case ScanDirection::kRowForward: return "row_forward";
    case ScanDirection::kColForward: return "col_forward";
    case ScanDirection::kRowReverse: return "row_reverse";
    case ScanDirection::kColReverse: return "col_reverse";
  }
  return "unknown";
}

std::vector<std::size_t> scan_order(ScanDirection dir, std::size_t h,
                                    std::size_t w) {
  if (h == 0 || w == 0) throw DimensionError("scan_order on an empty grid");
  std::vector<std::size_t> order;
  order.reserve(h * w);
  const bool by_col = dir == ScanDirection::kColForward ||
                      dir == ScanDirection::kColReverse;
  if (by_col) {
    for (std::size_t j = 0; j < w; ++j) {
      for (std::size_t i = 0; i < h; ++i) order.push_back(i * w + j);
    }
  } else {
    for (std::size_t i = 0; i < h * w; ++i) order.push_back(i);
  }
  if (dir == ScanDirection::kRowReverse || dir == ScanDirection::kColReverse) {
    std::reverse(order.begin(), order.end());
  }
  return order;
}

std::vector<std::size_t> invert_order(const std::vector<std::size_t>& order) {
  std::vector<std::size_t> inv(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) inv.at(order[i]) = i;
  return inv;
}

template <typename T>
std::array<Tensor<T>, 4> cross_scan(const Tensor<T>& fmap) {
  if (fmap.rank() != 3) {
    throw DimensionError("cross_scan expects [C,H,W], got " +
                         shape_str(fmap.shape()));
  }
  const std::size_t c = fmap.dim(0), h = fmap.dim(1), w = fmap.dim(2);
  std::array<Tensor<T>, 4> out;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto order = scan_order(kAllDirections[k], h, w);
    Tensor<T> seq({h * w, c});
    for (std::size_t i = 0; i < h * w; ++i) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        seq[i * c + ch] = fmap[ch * h * w + order[i]];
      }
    }
    out[k] = std::move(seq);
  }
  return out;
}

template <typename T>
Tensor<T> cross_merge(const std::array<Tensor<T>, 4>& seqs, std::size_t h,
                      std::size_t w) {
  if (seqs[0].rank() != 2) {
    throw DimensionError("cross_merge expects sequences [H*W, C]");
  }
  const std::size_t c = seqs[0].dim(1);
  for (const auto& s : seqs) {
    if (s.shape() != Shape{h * w, c}) {
      throw DimensionError("cross_merge: sequence " + shape_str(s.shape()) +
                           " does not match " + std::to_string(h) + "x" +
                           std::to_string(w) + " grid with " +
                           std::to_string(c) + " channels");
    }
  }
  Tensor<T> out({c, h, w});
  for (std::size_t k = 0; k < 4; ++k) {
    const auto order = scan_order(kAllDirections[k], h, w);
    for (std::size_t i = 0; i < h * w; ++i) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        out[ch * h * w + order[i]] += seqs[k][i * c + ch];
      }
    }
  }
  return out;
}

template <typename T>
VmLayer<T>::VmLayer(const VmLayerConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.channels == 0 || cfg.state_size == 0) {
    throw ConfigError("VM layer needs channels >= 1 and state size >= 1");
  }
  const std::size_t c = cfg.channels;
  norm_in_gamma = constant_param<T>({c}, 1.0);
  norm_in_beta = constant_param<T>({c}, 0.0);
  norm_out_gamma = constant_param<T>({c}, 1.0);
  norm_out_beta = constant_param<T>({c}, 0.0);
  ssm::S6Config s6{c, cfg.state_size, cfg.dt_rank};
  scans_.reserve(4);
  for (std::size_t k = 0; k < 4; ++k) scans_.emplace_back(s6, rng);
}

template <typename T>
Var<T> VmLayer<T>::forward(const Var<T>& x) const {
  if (x.shape().size() != 4 || x.dim(1) != cfg_.channels) {
    throw DimensionError("VM layer expects [N, " +
                         std::to_string(cfg_.channels) + ", H, W], got " +
                         shape_str(x.shape()));
  }
  const std::size_t h = x.dim(2), w = x.dim(3);
  const Var<T> tokens = ops::layer_norm(ops::nchw_to_tokens(x), norm_in_gamma,
                                        norm_in_beta, cfg_.eps);
  Var<T> merged;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto order = scan_order(kAllDirections[k], h, w);
    const Var<T> seq = ops::gather_rows(tokens, order);
    const Var<T> back =
        ops::gather_rows(scans_[k].forward(seq), invert_order(order));
    merged = merged.defined() ? ops::add(merged, back) : back;
  }
  const Var<T> normed =
      ops::layer_norm(merged, norm_out_gamma, norm_out_beta, cfg_.eps);
  return ops::add(x, ops::tokens_to_nchw(normed, h, w));
}

template <typename T>
void VmLayer<T>::collect(const std::string& prefix, ParamList<T>& out) {
  out.add(join_name(prefix, "norm_in.weight"), norm_in_gamma);
  out.add(join_name(prefix, "norm_in.bias"), norm_in_beta);
  for (std::size_t k = 0; k < 4; ++k) {
    scans_[k].collect(join_name(prefix, std::string("ssm.") +
                                            direction_name(kAllDirections[k])),
                      out);
  }
  out.add(join_name(prefix, "norm_out.weight"), norm_out_gamma);
  out.add(join_name(prefix, "norm_out.bias"), norm_out_beta);
}

template std::array<Tensor<float>, 4> cross_scan(const Tensor<float>&);
template std::array<Tensor<double>, 4> cross_scan(const Tensor<double>&);
template Tensor<float> cross_merge(const std::array<Tensor<float>, 4>&,
                                   std::size_t, std::size_t);
template Tensor<double> cross_merge(const std::array<Tensor<double>, 4>&,
                                    std::size_t, std::size_t);
template class VmLayer<float>;
template class VmLayer<double>;

}  // namespace mpox::vm
