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

#include "mpox/blocks.h"

#include <cmath>

namespace mpox::blocks {

template <typename T>
ConvBn<T>::ConvBn(std::size_t in, std::size_t out, std::size_t kernel,
                  std::size_t stride, std::size_t groups, bool act, Rng& rng)
    : stats(out), opt_{stride, kernel / 2, groups}, act_(act) {
  if (groups == 0 || in % groups != 0 || out % groups != 0) {
    throw ConfigError("conv groups " + std::to_string(groups) +
                      " must divide " + std::to_string(in) + " and " +
                      std::to_string(out));
  }
  const std::size_t fan_in = (in / groups) * kernel * kernel;
  weight = uniform_param<T>({out, in / groups, kernel, kernel},
                            std::sqrt(6.0 / static_cast<double>(fan_in)), rng);
  gamma = constant_param<T>({out}, 1.0);
  beta = constant_param<T>({out}, 0.0);
}

template <typename T>
Var<T> ConvBn<T>::forward(const Var<T>& x, bool training) {
  ops::BatchNormOptions bn;
  bn.training = training;
  Var<T> y = ops::batch_norm2d(ops::conv2d(x, weight, Var<T>(), opt_), gamma,
                               beta, stats, bn);
  return act_ ? ops::silu(y) : y;
}

template <typename T>
void ConvBn<T>::collect(const std::string& prefix, ParamList<T>& out) {
  out.add(join_name(prefix, "conv.weight"), weight);
  out.add(join_name(prefix, "bn.weight"), gamma);
  out.add(join_name(prefix, "bn.bias"), beta);
  out.add_buffer(join_name(prefix, "bn.running_mean"), stats.running_mean);
  out.add_buffer(join_name(prefix, "bn.running_var"), stats.running_var);
}

namespace {

InResConfig checked(const InResConfig& cfg) {
  if (cfg.stride != 1 && cfg.stride != 2) {
    throw ConfigError("InRes stride must be 1 or 2");
  }
  if (cfg.in_channels == 0 || cfg.out_channels == 0 || cfg.expansion == 0) {
    throw ConfigError("InRes channels and expansion must be >= 1");
  }
  return cfg;
}

}  // namespace

template <typename T>
InRes<T>::InRes(const InResConfig& cfg, Rng& rng)
    : expand(checked(cfg).in_channels, cfg.in_channels * cfg.expansion, 1, 1,
             1, true, rng),
      depthwise(cfg.in_channels * cfg.expansion,
                cfg.in_channels * cfg.expansion, 3, cfg.stride,
                cfg.in_channels * cfg.expansion, true, rng),
      project(cfg.in_channels * cfg.expansion, cfg.out_channels, 1, 1, 1,
              false, rng),
      cfg_(cfg),
      residual_(cfg.stride == 1 && cfg.in_channels == cfg.out_channels) {}

template <typename T>
Var<T> InRes<T>::forward(const Var<T>& x, bool training) {
  if (x.shape().size() != 4 || x.dim(1) != cfg_.in_channels) {
    throw DimensionError("InRes expects [N, " +
                         std::to_string(cfg_.in_channels) + ", H, W], got " +
                         shape_str(x.shape()));
  }
  if (x.dim(2) % cfg_.stride != 0 || x.dim(3) % cfg_.stride != 0) {
    throw DimensionError("InRes: spatial size " + shape_str(x.shape()) +
                         " not divisible by stride " +
                         std::to_string(cfg_.stride));
  }
  Var<T> y = expand.forward(x, training);
  y = depthwise.forward(y, training);
  y = project.forward(y, training);
  return residual_ ? ops::add(x, y) : y;
}

template <typename T>
void InRes<T>::collect(const std::string& prefix, ParamList<T>& out) {
  expand.collect(join_name(prefix, "expand"), out);
  depthwise.collect(join_name(prefix, "dw"), out);
  project.collect(join_name(prefix, "project"), out);
}

template <typename T>
LocalRepresentation<T>::LocalRepresentation(std::size_t channels, Rng& rng)
    : depthwise(channels, channels, 3, 1, channels, true, rng),
      pointwise(channels, channels, 1, 1, 1, true, rng) {}

template <typename T>
Var<T> LocalRepresentation<T>::forward(const Var<T>& x, bool training) {
  return pointwise.forward(depthwise.forward(x, training), training);
}

template <typename T>
void LocalRepresentation<T>::collect(const std::string& prefix,
                                     ParamList<T>& out) {
  depthwise.collect(join_name(prefix, "dw"), out);
  pointwise.collect(join_name(prefix, "pw"), out);
}

std::size_t eca_kernel_size(std::size_t channels) {
  if (channels == 0) throw ConfigError("ECA on zero channels");
  const double t = (std::log2(static_cast<double>(channels)) + 1.0) / 2.0;
  std::size_t k = static_cast<std::size_t>(t);
  if (k % 2 == 0) ++k;
  k = std::max<std::size_t>(k, 3);
  // Narrow groups cannot fit the minimum kernel; use the widest odd one.
  const std::size_t widest = channels % 2 == 1 ? channels : channels - 1;
  return std::min(k, widest);
}

template <typename T>
Eca<T>::Eca(std::size_t channels, std::size_t kernel, Rng& rng)
    : channels_(channels) {
  if (kernel % 2 == 0) {
    throw ConfigError("ECA kernel size must be odd, got " +
                      std::to_string(kernel));
  }
  if (kernel > channels) {
    throw ConfigError("ECA kernel size " + std::to_string(kernel) +
                      " exceeds " + std::to_string(channels) + " channels");
  }
  weight = uniform_param<T>({kernel}, 1.0 / std::sqrt(double(kernel)), rng);
}

template <typename T>
Var<T> Eca<T>::forward(const Var<T>& x) const {
  if (x.shape().size() != 4 || x.dim(1) != channels_) {
    throw DimensionError("ECA expects [N, " + std::to_string(channels_) +
                         ", H, W], got " + shape_str(x.shape()));
  }
  const Var<T> scale =
      ops::sigmoid(ops::channel_conv1d(ops::global_avg_pool(x), weight));
  return ops::scale_channels(x, scale);
}

template <typename T>
void Eca<T>::collect(const std::string& prefix, ParamList<T>& out) {
  out.add(join_name(prefix, "conv.weight"), weight);
}

std::vector<std::size_t> split_sizes(std::size_t channels,
                                     std::size_t groups) {
  if (groups == 0 || channels < groups) {
    throw ConfigError("cannot split " + std::to_string(channels) +
                      " channels into " + std::to_string(groups) + " groups");
  }
  std::vector<std::size_t> sizes(groups, channels / groups);
  sizes.back() += channels % groups;
  return sizes;
}

namespace {

GmlgffConfig validated(const GmlgffConfig& cfg) {
  if (cfg.enable_fusion && !cfg.enable_global) {
    throw ConfigError("GMLGFF fusion requires the global branch");
  }
  if (cfg.enable_global) split_sizes(cfg.channels, cfg.groups);
  if (cfg.channels == 0) throw ConfigError("GMLGFF on zero channels");
  return cfg;
}

}  // namespace

template <typename T>
Gmlgff<T>::Gmlgff(const GmlgffConfig& cfg, Rng& rng)
    : local(validated(cfg).channels, rng), cfg_(cfg) {
  if (!cfg.enable_global) return;
  splits_ = split_sizes(cfg.channels, cfg.groups);
  global.reserve(splits_.size());
  for (std::size_t c : splits_) {
    vm::VmLayerConfig v;
    v.channels = c;
    v.state_size = cfg.state_size;
    v.dt_rank = cfg.dt_rank > 0 ? cfg.dt_rank : std::max<std::size_t>(1, c / 2);
    global.emplace_back(v, rng);
  }
  if (cfg.enable_fusion) {
    eca.emplace(cfg.channels, eca_kernel_size(cfg.channels), rng);
    fuse.emplace(2 * cfg.channels, cfg.channels, 1, 1, 1, true, rng);
  }
}

template <typename T>
Var<T> Gmlgff<T>::forward(const Var<T>& x, bool training) {
  if (x.shape().size() != 4 || x.dim(1) != cfg_.channels) {
    throw DimensionError("GMLGFF expects [N, " +
                         std::to_string(cfg_.channels) + ", H, W], got " +
                         shape_str(x.shape()));
  }
  const Var<T> l = local.forward(x, training);
  if (!cfg_.enable_global) return ops::add(x, l);

  std::vector<Var<T>> parts;
  std::size_t begin = 0;
  for (std::size_t g = 0; g < splits_.size(); ++g) {
    const Var<T> part = splits_.size() == 1
                            ? l
                            : ops::slice(l, 1, begin, splits_[g]);
    parts.push_back(global[g].forward(part));
    begin += splits_[g];
  }
  const Var<T> glob = parts.size() == 1 ? parts[0] : ops::concat(parts, 1);
  if (!cfg_.enable_fusion) return ops::add(x, glob);

  const Var<T> cat = ops::concat(std::vector<Var<T>>{eca->forward(l), glob}, 1);
  return ops::add(x, fuse->forward(cat, training));
}

template <typename T>
void Gmlgff<T>::collect(const std::string& prefix, ParamList<T>& out) {
  local.collect(join_name(prefix, "local"), out);
  for (std::size_t g = 0; g < global.size(); ++g) {
    global[g].collect(join_name(prefix, "global" + std::to_string(g)), out);
  }
  if (eca) eca->collect(join_name(prefix, "eca"), out);
  if (fuse) fuse->collect(join_name(prefix, "fuse"), out);
}

template class ConvBn<float>;
template class ConvBn<double>;
template class InRes<float>;
template class InRes<double>;
template class LocalRepresentation<float>;
template class LocalRepresentation<double>;
template class Eca<float>;
template class Eca<double>;
template class Gmlgff<float>;
template class Gmlgff<double>;

}  // namespace mpox::blocks
