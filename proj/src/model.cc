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

#include "mpox/model.h"

#include <algorithm>
#include <cmath>

namespace mpox {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (input_size == 0 || input_size % 16 != 0) {
    fail("model.input_size must be a positive multiple of 16, got " +
         std::to_string(input_size));
  }
  if (widths.size() != 3) fail("model.widths needs exactly 3 entries");
  if (depths.size() != 2) fail("model.depths needs exactly 2 entries");
  if (in_channels == 0 || stem_channels == 0 || head_channels == 0 ||
      num_classes == 0 || state_size == 0 || expansion == 0) {
    fail("model channel counts, classes, state size and expansion must be >= 1");
  }
  for (std::size_t w : widths) {
    if (w == 0) fail("model.widths entries must be >= 1");
  }
  if (enable_fusion && !enable_global) {
    fail("model.enable_fusion requires model.enable_global");
  }
  if (enable_global) {
    if (groups == 0) fail("model.groups must be >= 1");
    for (std::size_t i = 0; i < 2; ++i) {
      if (depths[i] > 0 && widths[i] < groups) {
        fail("stage width " + std::to_string(widths[i]) +
             " is smaller than model.groups=" + std::to_string(groups));
      }
    }
  }
}

ModelConfig ModelConfig::scaled(std::size_t divisor) const {
  if (divisor == 0) throw ConfigError("width divisor must be >= 1");
  ModelConfig c = *this;
  auto div = [divisor](std::size_t v) {
    return std::max<std::size_t>(1, v / divisor);
  };
  c.stem_channels = div(stem_channels);
  for (auto& w : c.widths) w = div(w);
  c.head_channels = div(head_channels);
  return c;
}

KeyValues ModelConfig::to_key_values() const {
  return {
      {"model.input_size", std::to_string(input_size)},
      {"model.in_channels", std::to_string(in_channels)},
      {"model.stem_channels", std::to_string(stem_channels)},
      {"model.widths", format_size_list(widths)},
      {"model.head_channels", std::to_string(head_channels)},
      {"model.depths", format_size_list(depths)},
      {"model.groups", std::to_string(groups)},
      {"model.state_size", std::to_string(state_size)},
      {"model.dt_rank", std::to_string(dt_rank)},
      {"model.expansion", std::to_string(expansion)},
      {"model.num_classes", std::to_string(num_classes)},
      {"model.enable_global", enable_global ? "true" : "false"},
      {"model.enable_fusion", enable_fusion ? "true" : "false"},
  };
}

void ModelConfig::apply(KeyValues& kv) {
  auto take = [&kv](const std::string& key, auto&& fn) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    fn(key, it->second);
    kv.erase(it);
  };
  auto size_field = [&](const std::string& key, std::size_t& field) {
    take(key, [&](const std::string& k, const std::string& v) {
      field = parse_size(k, v);
    });
  };
  size_field("model.input_size", input_size);
  size_field("model.in_channels", in_channels);
  size_field("model.stem_channels", stem_channels);
  size_field("model.head_channels", head_channels);
  size_field("model.groups", groups);
  size_field("model.state_size", state_size);
  size_field("model.dt_rank", dt_rank);
  size_field("model.expansion", expansion);
  size_field("model.num_classes", num_classes);
  take("model.widths", [&](const std::string& k, const std::string& v) {
    widths = parse_size_list(k, v);
  });
  take("model.depths", [&](const std::string& k, const std::string& v) {
    depths = parse_size_list(k, v);
  });
  take("model.enable_global", [&](const std::string& k, const std::string& v) {
    enable_global = parse_bool(k, v);
  });
  take("model.enable_fusion", [&](const std::string& k, const std::string& v) {
    enable_fusion = parse_bool(k, v);
  });
}

ModelConfig apply_ablation(ModelConfig cfg, const std::string& name) {
  if (name == "basic") {
    cfg.enable_global = false;
    cfg.enable_fusion = false;
  } else if (name == "vm") {
    cfg.enable_global = true;
    cfg.enable_fusion = false;
    cfg.groups = 1;
  } else if (name == "vm-fusion" || name == "g1") {
    cfg.enable_global = cfg.enable_fusion = true;
    cfg.groups = 1;
  } else if (name == "g2" || name == "g3" || name == "g4") {
    cfg.enable_global = cfg.enable_fusion = true;
    cfg.groups = static_cast<std::size_t>(name[1] - '0');
  } else {
    throw ConfigError("unknown ablation '" + name +
                      "' (basic, vm, vm-fusion, g2, g3, g4)");
  }
  return cfg;
}

namespace {

const ModelConfig& validated(const ModelConfig& cfg) {
  cfg.validate();
  return cfg;
}

blocks::GmlgffConfig stage_block(const ModelConfig& cfg, std::size_t width) {
  blocks::GmlgffConfig g;
  g.channels = width;
  g.groups = cfg.groups;
  g.enable_global = cfg.enable_global;
  g.enable_fusion = cfg.enable_fusion;
  g.state_size = cfg.state_size;
  g.dt_rank = cfg.dt_rank;
  return g;
}

blocks::InResConfig inres(std::size_t in, std::size_t out, std::size_t stride,
                          std::size_t t) {
  return {in, out, stride, t};
}

}  // namespace

template <typename T>
Model<T>::Model(const ModelConfig& cfg, std::uint64_t seed)
    : Model(cfg, Rng(seed)) {}

template <typename T>
Model<T>::Model(const ModelConfig& cfg, Rng&& rng)
    : stem(validated(cfg).in_channels, cfg.stem_channels, 3, 2, 1, true, rng),
      stem_block(inres(cfg.stem_channels, cfg.stem_channels, 1, cfg.expansion),
                 rng),
      down1(inres(cfg.stem_channels, cfg.widths[0], 2, cfg.expansion), rng),
      down2(inres(cfg.widths[0], cfg.widths[1], 2, cfg.expansion), rng),
      down3(inres(cfg.widths[1], cfg.widths[2], 2, cfg.expansion), rng),
      head(cfg.widths[2], cfg.head_channels, 1, 1, 1, true, rng),
      cfg_(cfg) {
  // Stage blocks draw after the fixed skeleton so that depth changes do not
  // reshuffle the initialization of the other layers.
  for (std::size_t i = 0; i < cfg.depths[0]; ++i) {
    stage2.emplace_back(stage_block(cfg, cfg.widths[0]), rng);
  }
  for (std::size_t i = 0; i < cfg.depths[1]; ++i) {
    stage3.emplace_back(stage_block(cfg, cfg.widths[1]), rng);
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.head_channels));
  fc_weight = uniform_param<T>({cfg.num_classes, cfg.head_channels}, bound, rng);
  fc_bias = uniform_param<T>({cfg.num_classes}, bound, rng);
}

template <typename T>
Var<T> Model<T>::features(const Var<T>& x, bool training) {
  const Shape want{x.shape().empty() ? 0 : x.dim(0), cfg_.in_channels,
                   cfg_.input_size, cfg_.input_size};
  if (x.shape().size() != 4 || x.shape() != want) {
    throw DimensionError("model expects [N, " +
                         std::to_string(cfg_.in_channels) + ", " +
                         std::to_string(cfg_.input_size) + ", " +
                         std::to_string(cfg_.input_size) + "], got " +
                         shape_str(x.shape()));
  }
  Var<T> y = stem.forward(x, training);
  y = stem_block.forward(y, training);
  y = down1.forward(y, training);
  for (auto& b : stage2) y = b.forward(y, training);
  y = down2.forward(y, training);
  for (auto& b : stage3) y = b.forward(y, training);
  y = down3.forward(y, training);
  return head.forward(y, training);
}

template <typename T>
Var<T> Model<T>::classify(const Var<T>& feats) const {
  return ops::linear(ops::global_avg_pool(feats), fc_weight, fc_bias);
}

template <typename T>
Var<T> Model<T>::forward(const Var<T>& x, bool training) {
  return classify(features(x, training));
}

template <typename T>
ParamList<T> Model<T>::parameters() {
  ParamList<T> out;
  stem.collect("stem", out);
  stem_block.collect("stem_block", out);
  down1.collect("down1", out);
  for (std::size_t i = 0; i < stage2.size(); ++i) {
    stage2[i].collect("stage2.block" + std::to_string(i), out);
  }
  down2.collect("down2", out);
  for (std::size_t i = 0; i < stage3.size(); ++i) {
    stage3[i].collect("stage3.block" + std::to_string(i), out);
  }
  down3.collect("down3", out);
  head.collect("head", out);
  out.add("fc.weight", fc_weight);
  out.add("fc.bias", fc_bias);
  return out;
}

template <typename T>
std::size_t count_params(Model<T>& model) {
  std::size_t n = 0;
  for (const auto& p : model.parameters().params) {
    if (p.trainable) n += p.var->value().numel();
  }
  return n;
}

std::uint64_t conv_macs(std::size_t in_channels, std::size_t out_channels,
                        std::size_t kernel, std::size_t groups,
                        std::size_t out_h, std::size_t out_w) {
  return static_cast<std::uint64_t>(kernel) * kernel * (in_channels / groups) *
         out_channels * out_h * out_w;
}

namespace {

class Profiler {
 public:
  explicit Profiler(ModelProfile& out) : out_(out) {}

  // Conv + BN. Returns the output spatial size.
  std::size_t conv(LayerProfile& l, std::size_t cin, std::size_t cout,
                   std::size_t k, std::size_t stride, std::size_t groups,
                   std::size_t hw) {
    const std::size_t out_hw = (hw + 2 * (k / 2) - k) / stride + 1;
    l.params += k * k * (cin / groups) * cout + 2 * cout;
    l.macs += conv_macs(cin, cout, k, groups, out_hw, out_hw);
    l.output = {cout, out_hw, out_hw};
    return out_hw;
  }

  std::size_t inres(const std::string& name, std::size_t cin, std::size_t cout,
                    std::size_t stride, std::size_t t, std::size_t hw) {
    LayerProfile l{name, {}, 0, 0};
    const std::size_t mid = cin * t;
    conv(l, cin, mid, 1, 1, 1, hw);
    const std::size_t out_hw = conv(l, mid, mid, 3, stride, mid, hw);
    conv(l, mid, cout, 1, 1, 1, out_hw);
    push(std::move(l));
    return out_hw;
  }

  void vm_layer(LayerProfile& l, std::size_t c, std::size_t n, std::size_t r,
                std::size_t hw) {
    const std::size_t per_dir = c * (r + 2 * n) + r * c + c + c * n + c;
    l.params += 4 * per_dir + 4 * c;
    const std::uint64_t per_pos = 4 * (c * (r + 2 * n) + r * c + 3 * c * n + c);
    l.macs += per_pos * hw * hw;
  }

  void gmlgff(const std::string& name, const ModelConfig& cfg, std::size_t c,
              std::size_t hw) {
    LayerProfile l{name, {}, 0, 0};
    conv(l, c, c, 3, 1, c, hw);
    conv(l, c, c, 1, 1, 1, hw);
    if (cfg.enable_global) {
      for (std::size_t g : blocks::split_sizes(c, cfg.groups)) {
        const std::size_t r =
            cfg.dt_rank > 0 ? cfg.dt_rank : std::max<std::size_t>(1, g / 2);
        vm_layer(l, g, cfg.state_size, r, hw);
      }
    }
    if (cfg.enable_fusion) {
      const std::size_t k = blocks::eca_kernel_size(c);
      l.params += k;
      l.macs += k * c;
      conv(l, 2 * c, c, 1, 1, 1, hw);
    }
    l.output = {c, hw, hw};
    push(std::move(l));
  }

  void push(LayerProfile l) {
    out_.params += l.params;
    out_.macs += l.macs;
    out_.layers.push_back(std::move(l));
  }

 private:
  ModelProfile& out_;
};

}  // namespace

ModelProfile profile_model(const ModelConfig& cfg, std::size_t input_size) {
  cfg.validate();
  const std::size_t size = input_size ? input_size : cfg.input_size;
  if (size % 16 != 0) {
    throw ConfigError("input size must be a multiple of 16, got " +
                      std::to_string(size));
  }
  ModelProfile out;
  Profiler p(out);
  LayerProfile stem{"stem", {}, 0, 0};
  std::size_t hw = p.conv(stem, cfg.in_channels, cfg.stem_channels, 3, 2, 1,
                          size);
  p.push(std::move(stem));
  hw = p.inres("stem_block", cfg.stem_channels, cfg.stem_channels, 1,
               cfg.expansion, hw);
  hw = p.inres("down1", cfg.stem_channels, cfg.widths[0], 2, cfg.expansion, hw);
  for (std::size_t i = 0; i < cfg.depths[0]; ++i) {
    p.gmlgff("stage2.block" + std::to_string(i), cfg, cfg.widths[0], hw);
  }
  hw = p.inres("down2", cfg.widths[0], cfg.widths[1], 2, cfg.expansion, hw);
  for (std::size_t i = 0; i < cfg.depths[1]; ++i) {
    p.gmlgff("stage3.block" + std::to_string(i), cfg, cfg.widths[1], hw);
  }
  hw = p.inres("down3", cfg.widths[1], cfg.widths[2], 2, cfg.expansion, hw);
  LayerProfile head{"head", {}, 0, 0};
  p.conv(head, cfg.widths[2], cfg.head_channels, 1, 1, 1, hw);
  p.push(std::move(head));
  LayerProfile fc{"fc", {cfg.num_classes}, 0, 0};
  fc.params = cfg.head_channels * cfg.num_classes + cfg.num_classes;
  fc.macs = cfg.head_channels * cfg.num_classes;
  p.push(std::move(fc));
  return out;
}

template <typename T>
FlopCount count_flops(const Model<T>& model, std::size_t input_size) {
  const ModelProfile p = profile_model(model.config(), input_size);
  return {p.macs, p.flops()};
}

template <typename T>
Tensor<T> cam_from_gradients(const Tensor<T>& features,
                             const Tensor<T>& grads) {
  if (features.rank() != 3 || grads.shape() != features.shape()) {
    throw DimensionError("cam_from_gradients expects matching [C,h,w] maps");
  }
  const std::size_t c = features.dim(0), h = features.dim(1),
                    w = features.dim(2);
  const std::size_t plane = h * w;
  Tensor<T> cam({h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    T weight = T(0);
    for (std::size_t i = 0; i < plane; ++i) weight += grads[ch * plane + i];
    weight /= static_cast<T>(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      cam[i] += weight * features[ch * plane + i];
    }
  }
  T mx = T(0);
  for (std::size_t i = 0; i < plane; ++i) {
    cam[i] = std::max(cam[i], T(0));
    mx = std::max(mx, cam[i]);
  }
  if (mx > T(0)) {
    for (std::size_t i = 0; i < plane; ++i) cam[i] /= mx;
  }
  return cam;
}

template <typename T>
Tensor<T> grad_cam(Model<T>& model, const Tensor<T>& image, int target_class) {
  const ModelConfig& cfg = model.config();
  if (target_class < 0 ||
      static_cast<std::size_t>(target_class) >= cfg.num_classes) {
    throw DomainError("grad_cam: class " + std::to_string(target_class) +
                      " outside [0, " + std::to_string(cfg.num_classes) + ")");
  }
  Tensor<T> batch = image;
  if (image.rank() == 3) {
    Shape s{1};
    s.insert(s.end(), image.shape().begin(), image.shape().end());
    batch = image.reshaped(s);
  }
  if (batch.rank() != 4 || batch.dim(0) != 1) {
    throw DimensionError("grad_cam expects one image, got " +
                         shape_str(image.shape()));
  }
  Tensor<T> feats;
  {
    NoGradGuard guard;
    feats = model.features(Var<T>(std::move(batch)), false).value();
  }
  // Only d logit / d features is needed: run the classifier on a fresh leaf
  // with detached copies of its weights so model gradients stay untouched.
  const Var<T> leaf(feats, true);
  const Var<T> w(model.fc_weight.value());
  const Var<T> b(model.fc_bias.value());
  const Var<T> logits = ops::linear(ops::global_avg_pool(leaf), w, b);
  Tensor<T> onehot(logits.shape());
  onehot[static_cast<std::size_t>(target_class)] = T(1);
  ops::weighted_sum(logits, onehot).backward();
  const Shape map{feats.dim(1), feats.dim(2), feats.dim(3)};
  return cam_from_gradients(feats.reshaped(map), leaf.grad().reshaped(map));
}

template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& map, std::size_t out_h,
                            std::size_t out_w) {
  if (map.rank() != 2 || out_h == 0 || out_w == 0) {
    throw DimensionError("upsample_bilinear expects a [h,w] map and a "
                         "non-empty target");
  }
  const std::size_t in_h = map.dim(0), in_w = map.dim(1);
  Tensor<T> out({out_h, out_w});
  const double sy = static_cast<double>(in_h) / out_h;
  const double sx = static_cast<double>(in_w) / out_w;
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(in_h - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, in_h - 1);
    const double wy = fy - y0;
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx =
          std::clamp((x + 0.5) * sx - 0.5, 0.0, double(in_w - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, in_w - 1);
      const double wx = fx - x0;
      const double top = map.at(y0, x0) * (1 - wx) + map.at(y0, x1) * wx;
      const double bot = map.at(y1, x0) * (1 - wx) + map.at(y1, x1) * wx;
      out.at(y, x) = static_cast<T>(top * (1 - wy) + bot * wy);
    }
  }
  return out;
}

#define MPOX_INSTANTIATE(T)                                                 \
  template class Model<T>;                                                  \
  template std::size_t count_params(Model<T>&);                             \
  template FlopCount count_flops(const Model<T>&, std::size_t);             \
  template Tensor<T> cam_from_gradients(const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> grad_cam(Model<T>&, const Tensor<T>&, int);            \
  template Tensor<T> upsample_bilinear(const Tensor<T>&, std::size_t,       \
                                       std::size_t);

MPOX_INSTANTIATE(float)
MPOX_INSTANTIATE(double)

#undef MPOX_INSTANTIATE

}  // namespace mpox
