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

#include "mpox/grad_check.h"
#include "mpox/ops.h"
#include "mpox/random.h"

namespace mpox {
namespace {

using V = Var<double>;
using Td = Tensor<double>;

Td random_tensor(Shape s, Rng& rng) {
  Td t(std::move(s));
  for (auto& v : t.storage()) v = rng.uniform(-1.0, 1.0);
  return t;
}

TEST(Conv2d, IdentityKernelReproducesInput) {
  Td w({1, 1, 3, 3}, 0.0);
  w.at(0, 0, 1, 1) = 1.0;
  const V y = ops::conv2d(V(Td({1, 1, 4, 4}, 1.0)), V(w), V(), {1, 1, 1});
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  for (double v : y.value().storage()) EXPECT_EQ(v, 1.0);
}

TEST(Conv2d, StemShape) {
  const Var<float> y =
      ops::conv2d(Var<float>(Tensor<float>({1, 3, 224, 224}, 0.5f)),
                  Var<float>(Tensor<float>({32, 3, 3, 3}, 0.1f)), Var<float>(),
                  {2, 1, 1});
  EXPECT_EQ(y.shape(), (Shape{1, 32, 112, 112}));
}

TEST(Conv2d, DepthwiseWindowSum) {
  const Td x({1, 2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  const V y = ops::conv2d(V(x), V(Td({2, 1, 3, 3}, 1.0)), V(), {1, 1, 2});
  EXPECT_DOUBLE_EQ(y.value().at(0, 0, 0, 0), 10.0);
  EXPECT_DOUBLE_EQ(y.value().at(0, 1, 0, 0), 26.0);
}

TEST(Conv2d, DepthwiseMatchesDirectLoop) {
  Rng rng(3);
  const std::size_t c = 3, h = 6, w = 5;
  const Td x = random_tensor({2, c, h, w}, rng);
  const Td k = random_tensor({c, 1, 3, 3}, rng);
  const V y = ops::conv2d(V(x), V(k), V(), {2, 1, c});
  ASSERT_EQ(y.shape(), (Shape{2, c, 3, 3}));
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
          double acc = 0.0;
          for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = 0; b < 3; ++b) {
              const long yy = static_cast<long>(2 * i + a) - 1;
              const long xx = static_cast<long>(2 * j + b) - 1;
              if (yy < 0 || xx < 0 || yy >= long(h) || xx >= long(w)) continue;
              acc += x.at(n, ch, yy, xx) * k.at(ch, 0, a, b);
            }
          EXPECT_NEAR(y.value().at(n, ch, i, j), acc, 1e-12);
        }
}

TEST(Conv2d, Errors) {
  EXPECT_THROW(ops::conv2d(V(Td({1, 3, 4, 4})), V(Td({4, 1, 3, 3})), V(),
                           {1, 1, 2}),
               ConfigError);
  EXPECT_THROW(
      ops::conv2d(V(Td({1, 3, 4, 4})), V(Td({4, 2, 3, 3})), V(), {1, 1, 1}),
      DimensionError);
}

TEST(Conv2d, IsPure) {
  Rng rng(5);
  const Td x = random_tensor({1, 2, 5, 5}, rng);
  const Td k = random_tensor({3, 2, 3, 3}, rng);
  const V a = ops::conv2d(V(x), V(k), V(), {1, 1, 1});
  const V b = ops::conv2d(V(x), V(k), V(), {1, 1, 1});
  EXPECT_EQ(a.value().storage(), b.value().storage());
}

TEST(BatchNorm, ConstantInputCollapsesToBeta) {
  ops::BatchNormStats<double> stats(2);
  const V y = ops::batch_norm2d(V(Td({2, 2, 3, 3}, 4.0)), V(Td({2}, 1.0)),
                                V(Td({2}, 0.0)), stats, {true, 0.1, 1e-5});
  for (double v : y.value().storage()) EXPECT_EQ(v, 0.0);
}

TEST(BatchNorm, UnitNormalization) {
  ops::BatchNormStats<double> stats(1);
  const V y =
      ops::batch_norm2d(V(Td({1, 1, 1, 2}, {-1.0, 1.0})), V(Td({1}, 1.0)),
                        V(Td({1}, 0.0)), stats, {true, 0.1, 1e-12});
  EXPECT_NEAR(y.value()[0], -1.0, 1e-9);
  EXPECT_NEAR(y.value()[1], 1.0, 1e-9);
  // Running stats move by momentum toward the batch (unbiased variance 2).
  EXPECT_NEAR(stats.running_mean[0], 0.0, 1e-15);
  EXPECT_NEAR(stats.running_var[0], 0.9 + 0.1 * 2.0, 1e-12);
}

TEST(BatchNorm, InferAffine) {
  ops::BatchNormStats<double> stats(1);
  const V y = ops::batch_norm2d(V(Td({1, 1, 1, 1}, 1.0)), V(Td({1}, 2.0)),
                                V(Td({1}, 3.0)), stats, {false, 0.1, 0.0});
  EXPECT_DOUBLE_EQ(y.value()[0], 5.0);
}

TEST(Elementwise, FixedPoints) {
  EXPECT_EQ(ops::silu(V(Td({1}, 0.0))).value()[0], 0.0);
  EXPECT_EQ(ops::sigmoid(V(Td({1}, 0.0))).value()[0], 0.5);
  const V s = ops::softmax_lastdim(V(Td({1, 4}, 0.0)));
  for (double v : s.value().storage()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Elementwise, SoftmaxRowsSumToOne) {
  Rng rng(9);
  Td x = random_tensor({5, 7}, rng);
  for (auto& v : x.storage()) v *= 30.0;
  const V s = ops::softmax_lastdim(V(x));
  for (std::size_t r = 0; r < 5; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 7; ++c) {
      const double p = s.value().at(r, c);
      EXPECT_GT(p, 0.0);
      EXPECT_LT(p, 1.0);
      total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(Linear, IdentityWeight) {
  Td w({3, 3}, 0.0);
  for (std::size_t i = 0; i < 3; ++i) w.at(i, i) = 1.0;
  const Td x({2, 3}, {1, 2, 3, 4, 5, 6});
  const V y = ops::linear(V(x), V(w), V(Td({3}, 0.0)));
  EXPECT_EQ(y.value().storage(), x.storage());
}

TEST(Linear, DotProduct) {
  const V y = ops::linear(V(Td({1, 2}, {2, 3})), V(Td({1, 2}, {1, 1})),
                          V(Td({1}, 1.0)));
  EXPECT_DOUBLE_EQ(y.value()[0], 6.0);
}

TEST(Linear, ClassifierShapeAndMismatch) {
  const V y = ops::linear(V(Td({1, 512}, 0.1)), V(Td({2, 512}, 0.1)), V());
  EXPECT_EQ(y.shape(), (Shape{1, 2}));
  EXPECT_THROW(ops::linear(V(Td({1, 4})), V(Td({2, 3})), V()), DimensionError);
}

TEST(GlobalAvgPool, Means) {
  EXPECT_DOUBLE_EQ(
      ops::global_avg_pool(V(Td({1, 1, 2, 2}, {1, 2, 3, 4}))).value()[0], 2.5);
  const V c = ops::global_avg_pool(V(Td({1, 3, 4, 4}, 7.0)));
  for (double v : c.value().storage()) EXPECT_DOUBLE_EQ(v, 7.0);
  const Td one({1, 3, 1, 1}, {1, 2, 3});
  EXPECT_EQ(ops::global_avg_pool(V(one)).value().storage(), one.storage());
}

TEST(CrossEntropy, ClosedForms) {
  EXPECT_NEAR(ops::cross_entropy(V(Td({1, 4}, 0.0)), {2}).value()[0],
              std::log(4.0), 1e-12);
  EXPECT_NEAR(ops::cross_entropy(V(Td({1, 2}, {2.0, 0.0})), {0}).value()[0],
              std::log1p(std::exp(-2.0)), 1e-12);
  EXPECT_NEAR(ops::cross_entropy(V(Td({1, 2}, {800.0, 0.0})), {0}).value()[0],
              0.0, 1e-12);
  EXPECT_THROW(ops::cross_entropy(V(Td({1, 2}, 0.0)), {2}), DomainError);
}

TEST(GradCheck, LinearLayer) {
  Rng rng(1);
  const auto r = grad_check_op(
      [](const std::vector<V>& in) {
        return ops::linear(in[0], in[1], in[2]);
      },
      {random_tensor({3, 4}, rng), random_tensor({5, 4}, rng),
       random_tensor({5}, rng)},
      {});
  EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;
}

TEST(GradCheck, SiluAtOne) {
  V x(Td({1}, 1.0), true);
  ops::silu(x).backward();
  const double h = 1e-5;
  const auto f = [](double v) { return v / (1.0 + std::exp(-v)); };
  const double numeric = (f(1.0 + h) - f(1.0 - h)) / (2 * h);
  EXPECT_NEAR(x.grad()[0], numeric, 1e-6);
}

TEST(GradCheck, Conv2d) {
  Rng rng(2);
  const auto r = grad_check_op(
      [](const std::vector<V>& in) {
        return ops::conv2d(in[0], in[1], in[2], {1, 1, 1});
      },
      {random_tensor({1, 2, 5, 5}, rng), random_tensor({3, 2, 3, 3}, rng),
       random_tensor({3}, rng)},
      {});
  EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;
}

TEST(GradCheck, NonFiniteGradientIsHardFailure) {
  V x(Td({1}, 1.0), true);
  EXPECT_THROW(grad_check(
                   [&] {
                     return ops::weighted_sum(
                         ops::exp(x), Td({1}, std::numeric_limits<double>::infinity()));
                   },
                   {{"x", &x}}, {}),
               NumericError);
}

}  // namespace
}  // namespace mpox
