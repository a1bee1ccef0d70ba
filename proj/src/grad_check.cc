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

#include "mpox/grad_check.h"

#include <algorithm>
#include <cmath>

#include "mpox/ops.h"
#include "mpox/random.h"

namespace mpox {

namespace {

double eval(const std::function<Var<double>()>& loss) {
  NoGradGuard guard;
  const Var<double> out = loss();
  if (out.value().numel() != 1) {
    throw DimensionError("grad_check loss must be a single value, got " +
                         shape_str(out.shape()));
  }
  return out.value()[0];
}

}  // namespace

GradCheckReport grad_check(const std::function<Var<double>()>& loss,
                           const std::vector<GradCheckInput>& inputs,
                           const GradCheckOptions& opt) {
  for (const auto& in : inputs) in.var->zero_grad();
  const Var<double> out = loss();
  out.backward();

  std::vector<Tensor<double>> analytic;
  std::vector<std::pair<std::size_t, std::size_t>> entries;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Var<double>& v = *inputs[k].var;
    Tensor<double> g =
        v.grad().empty() ? Tensor<double>(v.shape()) : v.grad();
    if (!g.all_finite()) {
      throw NumericError("grad_check: non-finite analytic gradient for " +
                         inputs[k].name);
    }
    for (std::size_t i = 0; i < g.numel(); ++i) entries.emplace_back(k, i);
    analytic.push_back(std::move(g));
  }
  if (opt.samples > 0 && opt.samples < entries.size()) {
    Rng rng(opt.seed);
    rng.shuffle(entries);
    entries.resize(opt.samples);
  }

  GradCheckReport report;
  for (const auto& [k, i] : entries) {
    double& slot = inputs[k].var->mutable_value()[i];
    const double saved = slot;
    slot = saved + opt.step;
    const double up = eval(loss);
    slot = saved - opt.step;
    const double down = eval(loss);
    slot = saved;
    const double numeric = (up - down) / (2.0 * opt.step);
    const double a = analytic[k][i];
    if (!std::isfinite(numeric)) {
      throw NumericError("grad_check: non-finite numeric gradient for " +
                         inputs[k].name);
    }
    const double denom = std::max({std::abs(a), std::abs(numeric), opt.floor});
    const double rel = std::abs(a - numeric) / denom;
    ++report.checked;
    if (rel > report.max_rel_error || report.worst.empty()) {
      report.max_rel_error = rel;
      report.worst = inputs[k].name + "[" + std::to_string(i) + "]";
    }
  }
  for (const auto& in : inputs) in.var->zero_grad();
  report.passed = report.max_rel_error <= opt.tolerance;
  return report;
}

GradCheckReport grad_check_op(
    const std::function<Var<double>(const std::vector<Var<double>>&)>& op,
    std::vector<Tensor<double>> inputs, const GradCheckOptions& opt) {
  std::vector<Var<double>> vars;
  for (auto& t : inputs) vars.emplace_back(std::move(t), true);
  Tensor<double> projection;
  {
    NoGradGuard guard;
    projection = Tensor<double>(op(vars).shape());
  }
  Rng rng(opt.seed ^ 0x5EEDull);
  for (std::size_t i = 0; i < projection.numel(); ++i) {
    projection[i] = rng.uniform(-1.0, 1.0);
  }
  std::vector<GradCheckInput> named;
  for (std::size_t k = 0; k < vars.size(); ++k) {
    named.push_back({"input" + std::to_string(k), &vars[k]});
  }
  return grad_check(
      [&] { return ops::weighted_sum(op(vars), projection); }, named, opt);
}

}  // namespace mpox
