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

// Analytic-versus-numeric gradient comparison in double precision.

#ifndef MPOX_GRAD_CHECK_H_
#define MPOX_GRAD_CHECK_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mpox/autodiff.h"

namespace mpox {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Relative errors are taken against max(|analytic|, |numeric|, floor) so
  // that entries with vanishing gradient are judged on an absolute scale.
  double floor = 1e-6;
  // 0 checks every entry; otherwise this many entries are sampled in total.
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "<input>[<flat index>]"
  bool passed = true;
};

struct GradCheckInput {
  std::string name;
  Var<double>* var;
};

// `loss` must rebuild a single-element output from the current values of
// the inputs on every call. Throws NumericError on non-finite gradients.
GradCheckReport grad_check(const std::function<Var<double>()>& loss,
                           const std::vector<GradCheckInput>& inputs,
                           const GradCheckOptions& opt = {});

// Convenience for a single op: the op output is projected onto fixed random
// weights so every output element contributes to the checked scalar.
GradCheckReport grad_check_op(
    const std::function<Var<double>(const std::vector<Var<double>>&)>& op,
    std::vector<Tensor<double>> inputs, const GradCheckOptions& opt = {});

}  // namespace mpox

#endif  // MPOX_GRAD_CHECK_H_
