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

#include <gtest/gtest.h>

#include "mpox/blocks.h"
#include "mpox/grad_check.h"
#include "mpox/random.h"

namespace mpox::blocks {
namespace {

using Td = Tensor<double>;
using V = Var<double>;

Td random_input(Shape s, Rng& rng) {
  Td t(std::move(s));
  for (auto& v : t.storage()) v = rng.uniform(-1.0, 1.0);
  return t;
}

void zero(ConvBn<double>& cb) { cb.weight.mutable_value().fill(0.0); }

TEST(InRes, ZeroedMainPathIsResidual) {
  Rng rng(1);
  InRes<double> block({8, 8, 1, 2}, rng);
  ASSERT_TRUE(block.has_residual());
  zero(block.expand);
  zero(block.depthwise);
  zero(block.project);
  const Td x = random_input({2, 8, 6, 6}, rng);
  const V y = block.forward(V(x), false);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.value()[i], x[i]);
}

TEST(InRes, DownsampleShape) {
  Rng rng(2);
  InRes<float> block({32, 64, 2, 1}, rng);
  EXPECT_FALSE(block.has_residual());
  const Var<float> y =
      block.forward(Var<float>(Tensor<float>({1, 32, 112, 112}, 0.1f)), false);
  EXPECT_EQ(y.shape(), (Shape{1, 64, 56, 56}));
}

TEST(InRes, StrideTwoNeverResidual) {
  Rng rng(3);
  EXPECT_FALSE(InRes<double>({8, 8, 2, 1}, rng).has_residual());
  EXPECT_FALSE(InRes<double>({8, 16, 1, 1}, rng).has_residual());
  InRes<double> block({4, 4, 2, 1}, rng);
  EXPECT_THROW(block.forward(V(Td({1, 4, 5, 5})), false), DimensionError);
}

TEST(LocalRepresentation, ShapePreserved) {
  Rng rng(4);
  LocalRepresentation<float> lr(64, rng);
  EXPECT_EQ(lr.forward(Var<float>(Tensor<float>({1, 64, 56, 56}, 0.2f)), false)
                .shape(),
            (Shape{1, 64, 56, 56}));
}

TEST(LocalRepresentation, ZeroInputZeroOutput) {
  Rng rng(5);
  LocalRepresentation<double> lr(6, rng);
  const V y = lr.forward(V(Td({1, 6, 5, 5}, 0.0)), false);
  for (double v : y.value().storage()) {
    EXPECT_EQ(v, 0.0);
  }
}

TEST(LocalRepresentation, GradCheckConvWeights) {
  Rng rng(6);
  LocalRepresentation<double> lr(4, rng);
  const Td x = random_input({2, 4, 5, 5}, rng);
  const Td proj = random_input({2, 4, 5, 5}, rng);
  const auto r = grad_check(
      [&] { return ops::weighted_sum(lr.forward(V(x), false), proj); },
      {{"depthwise", &lr.depthwise.weight}, {"pointwise", &lr.pointwise.weight}},
      {});
  EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Eca, KernelRule) {
  EXPECT_EQ(eca_kernel_size(64), 3u);
  EXPECT_EQ(eca_kernel_size(16), 3u);
  EXPECT_EQ(eca_kernel_size(128), 5u);
  EXPECT_EQ(eca_kernel_size(256), 5u);
  EXPECT_EQ(eca_kernel_size(2), 1u);
  EXPECT_EQ(eca_kernel_size(1), 1u);
}

TEST(Eca, Errors) {
  Rng rng(7);
  EXPECT_THROW(Eca<double>(8, 4, rng), ConfigError);
  EXPECT_THROW(Eca<double>(2, 3, rng), ConfigError);
}

TEST(Eca, UniformChannelsGetEqualScales) {
  Rng rng(8);
  Eca<double> eca(6, 3, rng);
  const Td x({1, 6, 3, 3}, 0.7);
  const V y = eca.forward(V(x));
  // Interior channels see the whole kernel; the zero padding only trims the
  // ends, so compare the interior.
  const double w = eca.weight.value()[0] + eca.weight.value()[1] +
                   eca.weight.value()[2];
  const double s = 1.0 / (1.0 + std::exp(-w * 0.7));
  for (std::size_t c = 1; c < 5; ++c) {
    for (std::size_t i = 0; i < 9; ++i) {
      EXPECT_NEAR(y.value()[c * 9 + i], 0.7 * s, 1e-15);
    }
  }
}

TEST(Eca, ZeroKernelHalves) {
  Rng rng(9);
  Eca<double> eca(8, 3, rng);
  eca.weight.mutable_value().fill(0.0);
  const Td x = random_input({2, 8, 3, 3}, rng);
  const V y = eca.forward(V(x));
  for (std::size_t i = 0; i < x.numel(); ++i) {
    EXPECT_DOUBLE_EQ(y.value()[i], x[i] / 2);
  }
}

TEST(Split, Sizes) {
  EXPECT_EQ(split_sizes(64, 4), (std::vector<std::size_t>{16, 16, 16, 16}));
  EXPECT_EQ(split_sizes(64, 3), (std::vector<std::size_t>{21, 21, 22}));
  EXPECT_EQ(split_sizes(64, 1), (std::vector<std::size_t>{64}));
  EXPECT_THROW(split_sizes(2, 3), ConfigError);
}

GmlgffConfig small_block(std::size_t c, std::size_t g, bool global = true,
                         bool fusion = true) {
  GmlgffConfig cfg;
  cfg.channels = c;
  cfg.groups = g;
  cfg.enable_global = global;
  cfg.enable_fusion = fusion;
  cfg.dt_rank = 2;
  return cfg;
}

TEST(Gmlgff, ShapePreservedForAllGroupings) {
  Rng rng(10);
  for (std::size_t g = 1; g <= 4; ++g) {
    for (std::size_t c : {g, std::size_t{7}, std::size_t{12}}) {
      Gmlgff<double> block(small_block(c, g), rng);
      const Td x = random_input({1, c, 4, 4}, rng);
      EXPECT_EQ(block.forward(V(x), true).shape(), x.shape()) << c << "/" << g;
    }
  }
}

TEST(Gmlgff, ZeroedFusionIsShortcut) {
  Rng rng(11);
  Gmlgff<double> block(small_block(8, 4), rng);
  ASSERT_TRUE(block.fuse.has_value());
  zero(*block.fuse);
  const Td x = random_input({2, 8, 4, 4}, rng);
  const V y = block.forward(V(x), false);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.value()[i], x[i]);
}

TEST(Gmlgff, BasicVariantIsInputPlusLocal) {
  Rng rng(12), twin(12);
  Gmlgff<double> block(small_block(6, 1, false, false), rng);
  LocalRepresentation<double> local(6, twin);
  EXPECT_TRUE(block.global.empty());
  EXPECT_FALSE(block.fuse.has_value());
  Rng rx(3);
  const Td x = random_input({1, 6, 5, 5}, rx);
  const V y = block.forward(V(x), false);
  const V l = local.forward(V(x), false);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    EXPECT_EQ(y.value()[i], x[i] + l.value()[i]);
  }
}

TEST(Gmlgff, ChannelMismatch) {
  Rng rng(13);
  Gmlgff<double> block(small_block(8, 2), rng);
  EXPECT_THROW(block.forward(V(Td({1, 6, 4, 4})), false), DimensionError);
  EXPECT_THROW(Gmlgff<double>(small_block(8, 2, false, true), rng),
               ConfigError);
}

std::size_t global_params(Gmlgff<double>& block) {
  ParamList<double> list;
  block.collect("", list);
  std::size_t n = 0;
  for (const auto& p : list.params) {
    if (p.name.rfind("global", 0) == 0) n += p.var->value().numel();
  }
  return n;
}

TEST(Gmlgff, GlobalParamsShrinkWithGroups) {
  std::size_t previous = 0;
  for (std::size_t g = 1; g <= 4; ++g) {
    Rng rng(14);
    GmlgffConfig cfg = small_block(64, g);
    cfg.dt_rank = 0;
    Gmlgff<double> block(cfg, rng);
    const std::size_t n = global_params(block);
    if (g > 1) {
      EXPECT_LT(n, previous) << g;
    }
    previous = n;
  }
}

}  // namespace
}  // namespace mpox::blocks
