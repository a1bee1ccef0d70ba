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

#include <gtest/gtest.h>

#include "mpox/ops.h"
#include "mpox/random.h"
#include "mpox/vision_mamba.h"

namespace mpox::vm {
namespace {

using Td = Tensor<double>;

Td random_map(std::size_t c, std::size_t h, std::size_t w, Rng& rng) {
  Td t({c, h, w});
  for (auto& v : t.storage()) v = rng.uniform(-1.0, 1.0);
  return t;
}

TEST(CrossScan, TwoByTwoOrders) {
  // a b / c d as 1, 2, 3, 4
  const auto seqs = cross_scan(Td({1, 2, 2}, {1, 2, 3, 4}));
  const std::vector<std::vector<double>> expected = {
      {1, 2, 3, 4}, {1, 3, 2, 4}, {4, 3, 2, 1}, {4, 2, 3, 1}};
  for (std::size_t d = 0; d < 4; ++d) {
    EXPECT_EQ(seqs[d].storage(), expected[d])
        << direction_name(kAllDirections[d]);
  }
}

TEST(CrossScan, SinglePixel) {
  for (const auto& s : cross_scan(Td({3, 1, 1}, {7, 8, 9}))) {
    EXPECT_EQ(s.storage(), (std::vector<double>{7, 8, 9}));
  }
}

TEST(CrossScan, SequenceLength) {
  for (const auto& s : cross_scan(Td({5, 14, 14}))) {
    EXPECT_EQ(s.shape(), (Shape{196, 5}));
  }
}

TEST(CrossScan, DirectionsAreDistinctBijections) {
  const std::size_t h = 3, w = 4;
  std::vector<std::vector<std::size_t>> orders;
  for (auto dir : kAllDirections) {
    auto o = scan_order(dir, h, w);
    auto sorted = o;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < h * w; ++i) EXPECT_EQ(sorted[i], i);
    orders.push_back(std::move(o));
  }
  for (std::size_t a = 0; a < 4; ++a) {
    for (std::size_t b = a + 1; b < 4; ++b) EXPECT_NE(orders[a], orders[b]);
  }
  // Reverse directions are exact reversals of their forward partners.
  EXPECT_EQ(orders[2], std::vector<std::size_t>(orders[0].rbegin(), orders[0].rend()));
  EXPECT_EQ(orders[3], std::vector<std::size_t>(orders[1].rbegin(), orders[1].rend()));
}

TEST(CrossMerge, UntouchedScansGiveFourTimes) {
  Rng rng(1);
  const Td m = random_map(3, 5, 4, rng);
  const Td merged = cross_merge(cross_scan(m), 5, 4);
  for (std::size_t i = 0; i < m.numel(); ++i) EXPECT_EQ(merged[i], 4.0 * m[i]);
}

TEST(CrossMerge, SingleDirection) {
  Rng rng(2);
  const Td m = random_map(2, 3, 3, rng);
  auto seqs = cross_scan(m);
  for (std::size_t d = 1; d < 4; ++d) seqs[d].fill(0.0);
  EXPECT_EQ(cross_merge(seqs, 3, 3).storage(), m.storage());
}

TEST(CrossMerge, RandomRoundTrip) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t c = 1 + rng.below(16), h = 1 + rng.below(8),
                      w = 1 + rng.below(8);
    const Td m = random_map(c, h, w, rng);
    const Td merged = cross_merge(cross_scan(m), h, w);
    for (std::size_t i = 0; i < m.numel(); ++i) {
      EXPECT_NEAR(merged[i], 4.0 * m[i], 1e-12);
    }
  }
}

TEST(CrossMerge, LengthMismatch) {
  auto seqs = cross_scan(Td({2, 3, 3}));
  seqs[1] = Td({8, 2});
  EXPECT_THROW(cross_merge(seqs, 3, 3), DimensionError);
}

VmLayerConfig small_layer(std::size_t c) {
  VmLayerConfig cfg;
  cfg.channels = c;
  cfg.state_size = 2;
  cfg.dt_rank = 4;
  return cfg;
}

TEST(VmLayer, ShapePreserved) {
  Rng rng(4);
  VmLayer<double> layer(small_layer(16), rng);
  Td x({1, 16, 14, 14});
  for (auto& v : x.storage()) v = rng.uniform(-1.0, 1.0);
  EXPECT_EQ(layer.forward(Var<double>(x)).shape(), x.shape());
}

TEST(VmLayer, ZeroedGlobalPathLeavesShortcut) {
  Rng rng(5);
  VmLayer<double> layer(small_layer(8), rng);
  for (std::size_t d = 0; d < 4; ++d) {
    auto& s6 = layer.scan(d);
    const std::size_t R = s6.config().dt_rank, N = s6.config().state_size;
    for (std::size_t r = R + N; r < R + 2 * N; ++r) {
      for (std::size_t c = 0; c < 8; ++c) s6.x_proj.mutable_value().at(r, c) = 0;
    }
    s6.D_skip.mutable_value().fill(0.0);
  }
  Td x({2, 8, 5, 6});
  for (auto& v : x.storage()) v = rng.uniform(-1.0, 1.0);
  const auto y = layer.forward(Var<double>(x));
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.value()[i], x[i]);
}

TEST(VmLayer, Deterministic) {
  Rng a(9), b(9);
  VmLayer<float> la(small_layer(8), a), lb(small_layer(8), b);
  Tensor<float> x({1, 8, 4, 4});
  Rng rx(1);
  for (auto& v : x.storage()) v = static_cast<float>(rx.uniform(-1.0, 1.0));
  EXPECT_EQ(la.forward(Var<float>(x)).value().storage(),
            lb.forward(Var<float>(x)).value().storage());
  EXPECT_EQ(la.forward(Var<float>(x)).value().storage(),
            la.forward(Var<float>(x)).value().storage());
}

TEST(VmLayer, GlobalReceptiveField) {
  // row_forward becomes a running sum (A -> 0 so A_bar = 1) and the other
  // directions are silenced; the first scanned pixel must reach the last.
  Rng rng(10);
  const std::size_t c = 4, h = 5, w = 5;
  VmLayer<double> layer(small_layer(c), rng);
  for (std::size_t d = 0; d < 4; ++d) {
    auto& s6 = layer.scan(d);
    s6.x_proj.mutable_value().fill(0.0);
    s6.D_skip.mutable_value().fill(0.0);
    if (d != 0) continue;
    s6.A_log.mutable_value().fill(-60.0);
    const std::size_t R = s6.config().dt_rank, N = s6.config().state_size;
    // B_t follows channel 0, C_t follows channel 1 (held constant below).
    for (std::size_t n = 0; n < N; ++n) {
      s6.x_proj.mutable_value().at(R + n, 0) = 1.0;
      s6.x_proj.mutable_value().at(R + N + n, 1) = 1.0;
    }
  }
  Td x({1, c, h, w});
  for (auto& v : x.storage()) v = rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < h * w; ++i) x[1 * h * w + i] = 2.0;
  Td x2 = x;
  x2[0] += 0.5;  // first pixel in row_forward order, channel 0
  const auto y1 = layer.forward(Var<double>(x)).value();
  const auto y2 = layer.forward(Var<double>(x2)).value();
  const std::size_t last = h * w - 1;
  bool changed = false;
  for (std::size_t ch = 0; ch < c; ++ch) {
    changed = changed || y1[ch * h * w + last] != y2[ch * h * w + last];
  }
  EXPECT_TRUE(changed);
}

}  // namespace
}  // namespace mpox::vm
