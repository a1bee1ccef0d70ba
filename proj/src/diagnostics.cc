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

#include "mpox/diagnostics.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "mpox/blocks.h"
#include "mpox/model.h"
#include "mpox/ops.h"
#include "mpox/random.h"
#include "mpox/ssm.h"
#include "mpox/vision_mamba.h"

namespace mpox {

namespace {

using Vars = std::vector<Var<double>>;
using OpFn = std::function<Var<double>(const Vars&)>;

Tensor<double> rand_tensor(Shape s, Rng& rng, double lo = -1.0,
                           double hi = 1.0) {
  Tensor<double> t(std::move(s));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Values in [-1, -margin] U [margin, 1].
Tensor<double> away_from_zero(Shape s, Rng& rng, double margin = 0.1) {
  Tensor<double> t(std::move(s));
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const double v = rng.uniform(margin, 1.0);
    t[i] = rng.uniform() < 0.5 ? -v : v;
  }
  return t;
}

// Checks a module by exposing its parameters plus the input as inputs.
GradCheckReport check_module(ParamList<double>& params, Var<double>& input,
                             const std::function<Var<double>()>& out,
                             const GradCheckOptions& opt, Rng& rng) {
  Tensor<double> proj;
  {
    NoGradGuard guard;
    proj = rand_tensor(out().shape(), rng);
  }
  std::vector<GradCheckInput> inputs{{"input", &input}};
  for (auto& p : params.params) inputs.push_back({p.name, p.var});
  return grad_check([&] { return ops::weighted_sum(out(), proj); }, inputs,
                    opt);
}

// At initialization delta is 1e-3..0.1, which leaves d loss / d A_log near
// 1e-7 where central differences are pure round-off. Checking at delta ~ 1
// keeps the A path well conditioned.
void widen_delta(ParamList<double>& params) {
  for (auto& p : params.params) {
    const std::string& n = p.name;
    if (n.size() >= 12 && n.compare(n.size() - 12, 12, "dt_proj.bias") == 0) {
      p.var->mutable_value().fill(0.5);
    }
  }
}

}  // namespace

std::vector<GradCheckRow> op_gradient_suite(std::uint64_t seed,
                                            double tolerance) {
  Rng rng(seed);
  GradCheckOptions opt;
  opt.tolerance = tolerance;
  opt.seed = seed;
  std::vector<GradCheckRow> rows;
  auto run = [&](const std::string& name, const OpFn& fn,
                 std::vector<Tensor<double>> inputs) {
    rows.push_back({name, grad_check_op(fn, std::move(inputs), opt)});
  };
  const Var<double> none;

  run("conv2d", [&](const Vars& v) {
    return ops::conv2d(v[0], v[1], v[2], {1, 1, 1});
  }, {rand_tensor({1, 2, 5, 5}, rng), rand_tensor({3, 2, 3, 3}, rng),
      rand_tensor({3}, rng)});
  run("conv2d_stride2", [&](const Vars& v) {
    return ops::conv2d(v[0], v[1], none, {2, 1, 1});
  }, {rand_tensor({2, 2, 6, 6}, rng), rand_tensor({4, 2, 3, 3}, rng)});
  run("conv2d_depthwise", [&](const Vars& v) {
    return ops::conv2d(v[0], v[1], none, {2, 1, 3});
  }, {rand_tensor({2, 3, 6, 6}, rng), rand_tensor({3, 1, 3, 3}, rng)});
  run("conv2d_pointwise_grouped", [&](const Vars& v) {
    return ops::conv2d(v[0], v[1], v[2], {1, 0, 2});
  }, {rand_tensor({2, 4, 3, 3}, rng), rand_tensor({6, 2, 1, 1}, rng),
      rand_tensor({6}, rng)});
  run("batch_norm2d_train", [&](const Vars& v) {
    ops::BatchNormStats<double> stats(3);
    return ops::batch_norm2d(v[0], v[1], v[2], stats, {true, 0.1, 1e-5});
  }, {rand_tensor({2, 3, 3, 3}, rng), rand_tensor({3}, rng),
      rand_tensor({3}, rng)});
  run("batch_norm2d_infer", [&](const Vars& v) {
    ops::BatchNormStats<double> stats(3);
    stats.running_mean = Tensor<double>({3}, {0.1, -0.2, 0.3});
    stats.running_var = Tensor<double>({3}, {0.5, 1.5, 2.0});
    return ops::batch_norm2d(v[0], v[1], v[2], stats, {false, 0.1, 1e-5});
  }, {rand_tensor({2, 3, 2, 2}, rng), rand_tensor({3}, rng),
      rand_tensor({3}, rng)});
  run("layer_norm", [](const Vars& v) {
    return ops::layer_norm(v[0], v[1], v[2]);
  }, {rand_tensor({2, 3, 5}, rng), rand_tensor({5}, rng),
      rand_tensor({5}, rng)});
  run("silu", [](const Vars& v) { return ops::silu(v[0]); },
      {rand_tensor({4, 5}, rng)});
  run("sigmoid", [](const Vars& v) { return ops::sigmoid(v[0]); },
      {rand_tensor({4, 5}, rng)});
  run("softplus", [](const Vars& v) { return ops::softplus(v[0]); },
      {rand_tensor({4, 5}, rng)});
  run("relu", [](const Vars& v) { return ops::relu(v[0]); },
      {away_from_zero({4, 5}, rng)});
  run("softmax_lastdim", [](const Vars& v) { return ops::softmax_lastdim(v[0]); },
      {rand_tensor({3, 4}, rng)});
  run("exp", [](const Vars& v) { return ops::exp(v[0]); },
      {rand_tensor({3, 4}, rng)});
  run("neg", [](const Vars& v) { return ops::neg(v[0]); },
      {rand_tensor({3, 4}, rng)});
  run("linear", [](const Vars& v) { return ops::linear(v[0], v[1], v[2]); },
      {rand_tensor({3, 4}, rng), rand_tensor({2, 4}, rng),
       rand_tensor({2}, rng)});
  run("linear_batched", [&](const Vars& v) {
    return ops::linear(v[0], v[1], none);
  }, {rand_tensor({2, 3, 4}, rng), rand_tensor({5, 4}, rng)});
  run("global_avg_pool", [](const Vars& v) { return ops::global_avg_pool(v[0]); },
      {rand_tensor({2, 3, 3, 2}, rng)});
  run("add", [](const Vars& v) { return ops::add(v[0], v[1]); },
      {rand_tensor({2, 3}, rng), rand_tensor({2, 3}, rng)});
  run("mul", [](const Vars& v) { return ops::mul(v[0], v[1]); },
      {rand_tensor({2, 3}, rng), rand_tensor({2, 3}, rng)});
  run("scale_channels", [](const Vars& v) {
    return ops::scale_channels(v[0], v[1]);
  }, {rand_tensor({2, 3, 2, 2}, rng), rand_tensor({2, 3}, rng)});
  run("concat", [](const Vars& v) {
    return ops::concat(Vars{v[0], v[1]}, 1);
  }, {rand_tensor({2, 2, 3}, rng), rand_tensor({2, 3, 3}, rng)});
  run("slice", [](const Vars& v) { return ops::slice(v[0], 1, 1, 2); },
      {rand_tensor({2, 4, 3}, rng)});
  run("reshape", [](const Vars& v) { return ops::reshape(v[0], {3, 4}); },
      {rand_tensor({2, 6}, rng)});
  run("nchw_to_tokens", [](const Vars& v) { return ops::nchw_to_tokens(v[0]); },
      {rand_tensor({2, 3, 2, 2}, rng)});
  run("tokens_to_nchw", [](const Vars& v) {
    return ops::tokens_to_nchw(v[0], 2, 3);
  }, {rand_tensor({2, 6, 3}, rng)});
  run("gather_rows", [](const Vars& v) {
    return ops::gather_rows(v[0], {3, 0, 2, 1});
  }, {rand_tensor({2, 4, 3}, rng)});
  run("channel_conv1d", [](const Vars& v) {
    return ops::channel_conv1d(v[0], v[1]);
  }, {rand_tensor({2, 6}, rng), rand_tensor({3}, rng)});
  run("cross_entropy", [](const Vars& v) {
    return ops::cross_entropy(v[0], {1, 0, 3});
  }, {rand_tensor({3, 4}, rng)});
  run("sum", [](const Vars& v) { return ops::sum(v[0]); },
      {rand_tensor({3, 2}, rng)});

  auto scan_inputs = [&](double a_lo, double a_hi) {
    return std::vector<Tensor<double>>{
        rand_tensor({2, 6, 3}, rng), rand_tensor({2, 6, 3}, rng, 0.05, 1.0),
        rand_tensor({3, 2}, rng, a_lo, a_hi), rand_tensor({2, 6, 2}, rng),
        rand_tensor({2, 6, 2}, rng), rand_tensor({3}, rng)};
  };
  const OpFn scan = [](const Vars& v) {
    return ssm::selective_scan(v[0], v[1], v[2], v[3], v[4], v[5]);
  };
  run("selective_scan", scan, scan_inputs(-2.0, -0.1));
  // |delta * A| below 1e-2 exercises the series branch of the backward.
  run("selective_scan_small_dA", scan, scan_inputs(-1e-3, -1e-4));

  {
    ssm::S6Config cfg{4, 2, 2};
    ssm::S6<double> s6(cfg, rng);
    ParamList<double> params;
    s6.collect("s6", params);
    widen_delta(params);
    Var<double> x(rand_tensor({2, 5, 4}, rng), true);
    rows.push_back({"s6", check_module(params, x, [&] { return s6.forward(x); },
                                       opt, rng)});
  }
  {
    vm::VmLayer<double> layer({3, 2, 2, 1e-5}, rng);
    ParamList<double> params;
    layer.collect("vm", params);
    widen_delta(params);
    Var<double> x(rand_tensor({2, 3, 3, 2}, rng), true);
    rows.push_back({"vm_layer", check_module(params, x, [&] {
                      return layer.forward(x);
                    }, opt, rng)});
  }
  {
    blocks::InRes<double> block({4, 6, 2, 2}, rng);
    ParamList<double> params;
    block.collect("inres", params);
    Var<double> x(rand_tensor({2, 4, 4, 4}, rng), true);
    rows.push_back({"inres", check_module(params, x, [&] {
                      return block.forward(x, true);
                    }, opt, rng)});
  }
  {
    blocks::LocalRepresentation<double> block(3, rng);
    ParamList<double> params;
    block.collect("local", params);
    Var<double> x(rand_tensor({2, 3, 3, 3}, rng), true);
    rows.push_back({"local_representation", check_module(params, x, [&] {
                      return block.forward(x, true);
                    }, opt, rng)});
  }
  {
    blocks::Eca<double> eca(6, 3, rng);
    ParamList<double> params;
    eca.collect("eca", params);
    Var<double> x(rand_tensor({2, 6, 2, 2}, rng), true);
    rows.push_back({"eca", check_module(params, x, [&] {
                      return eca.forward(x);
                    }, opt, rng)});
  }
  {
    blocks::GmlgffConfig cfg;
    cfg.channels = 6;
    cfg.groups = 2;
    blocks::Gmlgff<double> block(cfg, rng);
    ParamList<double> params;
    block.collect("gmlgff", params);
    widen_delta(params);
    // Infer-mode BN: in train mode the fusion BN cancels per-channel shifts
    // of its input, so the global branch's output-norm bias has an exactly
    // zero gradient that only measures round-off. Train-mode BN backward is
    // covered by the rows above and the whole-model check.
    for (auto& b : params.buffers) {
      const bool var = b.name.find("running_var") != std::string::npos;
      *b.tensor = rand_tensor(b.tensor->shape(), rng, var ? 0.5 : -0.5,
                              var ? 1.5 : 0.5);
    }
    Var<double> x(rand_tensor({2, 6, 3, 3}, rng), true);
    rows.push_back({"gmlgff", check_module(params, x, [&] {
                      return block.forward(x, false);
                    }, opt, rng)});
  }
  return rows;
}

GradCheckRow model_gradient_check(std::uint64_t seed, std::size_t samples,
                                  double tolerance) {
  ModelConfig cfg = ModelConfig{}.scaled(8);
  cfg.input_size = 32;
  Model<double> model(cfg, seed);
  Rng rng(seed ^ 0xA11CEull);
  const Var<double> x(rand_tensor({2, cfg.in_channels, 32, 32}, rng));
  const std::vector<int> y{0, 1};
  ParamList<double> params = model.parameters();
  std::vector<GradCheckInput> inputs;
  for (auto& p : params.params) inputs.push_back({p.name, p.var});
  GradCheckOptions opt;
  opt.samples = samples;
  opt.seed = seed;
  opt.tolerance = tolerance;
  const auto report = grad_check(
      [&] { return ops::cross_entropy(model.forward(x, true), y); }, inputs,
      opt);
  return {"model_width8_32px", report};
}

std::vector<BenchRow> bench_scan(const std::vector<std::size_t>& lengths,
                                 std::uint64_t seed, std::size_t channels,
                                 std::size_t state, std::size_t repeats) {
  if (repeats == 0) throw ConfigError("bench needs at least one repeat");
  Rng rng(seed);
  struct Case {
    ssm::SsmParams<double> params;
    Tensor<double> x;
    std::vector<double> times;
  };
  std::vector<Case> cases;
  volatile double sink = 0.0;
  for (std::size_t len : lengths) {
    if (len < 64) throw ConfigError("bench lengths must be >= 64");
    ssm::SsmParams<double> p{rand_tensor({channels, state}, rng, -2.0, -0.1),
                             rand_tensor({len, state}, rng),
                             rand_tensor({len, state}, rng),
                             rand_tensor({len, channels}, rng, 0.01, 0.2),
                             rand_tensor({channels}, rng)};
    Tensor<double> x = rand_tensor({len, channels}, rng);
    sink = ssm::selective_scan(x, p)[0];  // warm-up
    cases.push_back({std::move(p), std::move(x), {}});
  }
  // Lengths are timed round-robin so that a slow stretch of the machine
  // hits every length alike instead of skewing one ratio.
  for (std::size_t r = 0; r < repeats; ++r) {
    for (auto& c : cases) {
      const auto t0 = std::chrono::steady_clock::now();
      sink = ssm::selective_scan(c.x, c.params)[c.x.numel() - 1];
      const auto t1 = std::chrono::steady_clock::now();
      c.times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
  }
  (void)sink;
  std::vector<BenchRow> rows;
  for (auto& c : cases) {
    std::sort(c.times.begin(), c.times.end());
    BenchRow row;
    row.length = c.x.dim(0);
    row.median_seconds = c.times[c.times.size() / 2];
    if (!rows.empty() && rows.back().length * 2 == row.length) {
      row.has_ratio = true;
      row.ratio = row.median_seconds / rows.back().median_seconds;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mpox
