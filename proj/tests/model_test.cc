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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "mpox/checkpoint.h"
#include "mpox/model.h"
#include "mpox/ops.h"
#include "mpox/random.h"

namespace mpox {
namespace {

namespace fs = std::filesystem;

ModelConfig tiny_config() {
  ModelConfig cfg = ModelConfig{}.scaled(8);
  cfg.input_size = 32;
  return cfg;
}

Tensor<float> random_batch(std::size_t n, std::size_t s, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<float> t({n, 3, s, s});
  for (auto& v : t.storage()) v = static_cast<float>(rng.uniform());
  return t;
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() /
         (name + "_" + std::to_string(::testing::UnitTest::GetInstance()
                                          ->random_seed()));
}

TEST(ModelConfig, DefaultsValidateAndRoundTrip) {
  ModelConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  KeyValues kv = cfg.to_key_values();
  ModelConfig back;
  back.groups = 1;
  back.apply(kv);
  EXPECT_TRUE(kv.empty());
  EXPECT_EQ(back, cfg);
}

TEST(ModelConfig, Invariants) {
  ModelConfig cfg;
  cfg.input_size = 200;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ModelConfig{};
  cfg.enable_global = false;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(apply_ablation(ModelConfig{}, "g9"), ConfigError);
}

TEST(Model, ShapeLadder) {
  Model<float> model(ModelConfig{}, 1);
  const ModelProfile prof = profile_model(model.config());
  auto shape_of = [&](const std::string& name) {
    for (const auto& l : prof.layers) {
      if (l.name == name) return l.output;
    }
    return Shape{};
  };
  EXPECT_EQ(shape_of("stem_block"), (Shape{32, 112, 112}));
  EXPECT_EQ(shape_of("down1"), (Shape{64, 56, 56}));
  EXPECT_EQ(shape_of("down2"), (Shape{128, 28, 28}));
  EXPECT_EQ(shape_of("down3"), (Shape{256, 14, 14}));
  EXPECT_EQ(shape_of("head"), (Shape{512, 14, 14}));
}

TEST(Model, ForwardShapeAtFullSize) {
  Model<float> model(ModelConfig{}, 2);
  NoGradGuard guard;
  const auto f = model.features(Var<float>(random_batch(1, 224, 1)));
  EXPECT_EQ(f.shape(), (Shape{1, 512, 14, 14}));
  const auto logits = model.classify(f);
  EXPECT_EQ(logits.shape(), (Shape{1, 2}));
  EXPECT_TRUE(logits.value().all_finite());
}

TEST(Model, SeedDeterminesParameters) {
  Model<float> a(tiny_config(), 5), b(tiny_config(), 5), c(tiny_config(), 6);
  auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  bool differs = false;
  for (std::size_t i = 0; i < pa.params.size(); ++i) {
    EXPECT_EQ(pa.params[i].var->value().storage(),
              pb.params[i].var->value().storage());
    differs = differs || pa.params[i].var->value().storage() !=
                             pc.params[i].var->value().storage();
  }
  EXPECT_TRUE(differs);
}

TEST(Model, NamesUnique) {
  Model<float> model(ModelConfig{}, 1);
  const auto list = model.parameters();
  std::set<std::string> names;
  for (const auto& p : list.params) EXPECT_TRUE(names.insert(p.name).second);
  for (const auto& b : list.buffers) EXPECT_TRUE(names.insert(b.name).second);
}

TEST(Model, ClassCountOnlyTouchesClassifier) {
  ModelConfig two = tiny_config(), four = tiny_config();
  four.num_classes = 4;
  Model<float> a(two, 3), b(four, 3);
  auto pa = a.parameters(), pb = b.parameters();
  ASSERT_EQ(pa.params.size(), pb.params.size());
  for (std::size_t i = 0; i < pa.params.size(); ++i) {
    ASSERT_EQ(pa.params[i].name, pb.params[i].name);
    const bool fc = pa.params[i].name.rfind("fc.", 0) == 0;
    EXPECT_EQ(pa.params[i].var->shape() == pb.params[i].var->shape(), !fc)
        << pa.params[i].name;
  }
}

TEST(Model, BatchRowsIndependent) {
  Model<float> model(tiny_config(), 4);
  NoGradGuard guard;
  const Tensor<float> one = random_batch(1, 32, 9);
  Tensor<float> four({4, 3, 32, 32});
  for (std::size_t n = 0; n < 4; ++n) {
    std::copy(one.storage().begin(), one.storage().end(),
              four.storage().begin() + n * one.numel());
  }
  const auto l1 = model.forward(Var<float>(one)).value();
  const auto l4 = model.forward(Var<float>(four)).value();
  for (std::size_t n = 0; n < 4; ++n) {
    for (std::size_t k = 0; k < 2; ++k) {
      EXPECT_NEAR(l4.at(n, k), l1.at(0, k), 1e-5f);
    }
  }
}

TEST(Model, SinglePixelReachesHead) {
  Model<double> model(tiny_config(), 5);
  NoGradGuard guard;
  Tensor<double> x({1, 3, 32, 32}, 0.0);
  const auto a = model.forward(Var<double>(x)).value();
  x.at(0, 0, 0, 0) = 1.0;
  const auto b = model.forward(Var<double>(x)).value();
  EXPECT_NE(a.storage(), b.storage());
}

TEST(Model, WrongSpatialSize) {
  Model<float> model(tiny_config(), 6);
  EXPECT_THROW(model.forward(Var<float>(random_batch(1, 48, 1))),
               DimensionError);
}

TEST(Counting, LinearLayer) {
  // 10 -> 2 classifier with bias is 22 parameters.
  ModelConfig cfg = tiny_config();
  cfg.head_channels = 10;
  Model<float> model(cfg, 1);
  EXPECT_EQ(model.fc_weight.value().numel() + model.fc_bias.value().numel(),
            22u);
}

TEST(Counting, ConvFlops) {
  // 3x3 conv, one channel in and out, 4x4 output: 144 MACs, 288 FLOPs.
  EXPECT_EQ(2 * conv_macs(1, 1, 3, 1, 4, 4), 288u);
  EXPECT_EQ(conv_macs(32, 32, 3, 32, 56, 56), 9u * 32u * 56u * 56u);
  ModelConfig cfg;
  cfg.input_size = 16;
  const ModelProfile prof = profile_model(cfg);
  ASSERT_EQ(prof.layers.front().name, "stem");
  EXPECT_EQ(prof.layers.front().output, (Shape{32, 8, 8}));
  EXPECT_EQ(prof.layers.front().macs, conv_macs(3, 32, 3, 1, 8, 8));
}

TEST(Counting, ProfileMatchesModel) {
  for (const char* name : {"basic", "vm", "vm-fusion", "g2", "g3", "g4"}) {
    const ModelConfig cfg = apply_ablation(ModelConfig{}, name);
    Model<float> model(cfg, 1);
    EXPECT_EQ(profile_model(cfg).params, count_params(model)) << name;
  }
}

TEST(Counting, Budget) {
  Model<float> model(ModelConfig{}, 1);
  EXPECT_NEAR(count_params(model) / 1e6, 0.77, 0.077);
  const FlopCount fc = count_flops(model);
  EXPECT_NEAR(fc.macs / 1e9, 0.53, 0.53 * 0.15);
  EXPECT_EQ(fc.flops, 2 * fc.macs);
  Model<float> basic(apply_ablation(ModelConfig{}, "basic"), 1);
  EXPECT_NEAR(count_params(basic) / 1e6, 0.34, 0.34 * 0.15);
}

TEST(GradCam, ZeroGradientsGiveZeroMap) {
  Tensor<double> feats({4, 3, 3}, 1.0), grads({4, 3, 3}, 0.0);
  const Tensor<double> cam = cam_from_gradients(feats, grads);
  for (double v : cam.storage()) EXPECT_EQ(v, 0.0);
}

TEST(GradCam, NormalisedAndShaped) {
  Model<float> model(tiny_config(), 7);
  const Tensor<float> img = random_batch(1, 32, 3).reshaped({3, 32, 32});
  const Tensor<float> cam = grad_cam(model, img, 1);
  ASSERT_EQ(cam.shape(), (Shape{2, 2}));
  float hi = 0.0f;
  for (float v : cam.storage()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
    hi = std::max(hi, v);
  }
  EXPECT_TRUE(hi == 0.0f || hi == 1.0f);
  EXPECT_THROW(grad_cam(model, img, 2), DomainError);
  EXPECT_EQ(upsample_bilinear(cam, 32, 32).shape(), (Shape{32, 32}));
}

TEST(GradCam, FullSizeHeatmap) {
  Model<float> model(ModelConfig{}, 8);
  const Tensor<float> img = random_batch(1, 224, 4).reshaped({3, 224, 224});
  const Tensor<float> cam = grad_cam(model, img, 0);
  EXPECT_EQ(cam.shape(), (Shape{14, 14}));
  EXPECT_EQ(upsample_bilinear(cam, 224, 224).shape(), (Shape{224, 224}));
}

TEST(Checkpoint, RoundTripIsBitwise) {
  Model<float> model(tiny_config(), 9);
  // Move the running statistics off their initial values.
  model.forward(Var<float>(random_batch(4, 32, 2)), true);
  const fs::path path = temp_path("mpox_roundtrip.ckpt");
  save_checkpoint(model, path.string());
  Model<float> loaded = load_checkpoint<float>(path.string());
  EXPECT_EQ(loaded.config(), model.config());
  NoGradGuard guard;
  const Tensor<float> x = random_batch(2, 32, 5);
  EXPECT_EQ(model.forward(Var<float>(x)).value().storage(),
            loaded.forward(Var<float>(x)).value().storage());
  fs::remove(path);
}

TEST(Checkpoint, CorruptFiles) {
  Model<float> model(tiny_config(), 10);
  const fs::path path = temp_path("mpox_corrupt.ckpt");
  save_checkpoint(model, path.string());
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  EXPECT_THROW(load_checkpoint<float>(path.string()), FormatError);
  save_checkpoint(model, path.string());
  fs::resize_file(path, fs::file_size(path) - 7);
  EXPECT_THROW(load_checkpoint<float>(path.string()), FormatError);
  fs::remove(path);
  EXPECT_THROW(load_checkpoint<float>(path.string()), DataError);

  ModelConfig other = tiny_config();
  other.num_classes = 3;
  Model<float> mismatched(other, 1);
  save_checkpoint(model, path.string());
  EXPECT_THROW(load_weights(mismatched, path.string()), FormatError);
  fs::remove(path);
}

}  // namespace
}  // namespace mpox
