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

// Self-checks shared by the CLI and the test binaries: the gradient suite
// over every differentiable op and block, and the scan timing harness.

#ifndef MPOX_DIAGNOSTICS_H_
#define MPOX_DIAGNOSTICS_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mpox/grad_check.h"

namespace mpox {

struct GradCheckRow {
  std::string name;
  GradCheckReport report;
};

// Every op, the fused scan, S6, VM layer and blocks, each at tolerance
// `tolerance` with f64 central differences (step 1e-5) on inputs in
// [-1, 1] (shifted away from kinks where needed).
std::vector<GradCheckRow> op_gradient_suite(std::uint64_t seed,
                                            double tolerance = 1e-4);

// Cross-entropy loss of a width/8 model at 32x32 input (train-mode BN),
// `samples` randomly chosen parameter entries.
GradCheckRow model_gradient_check(std::uint64_t seed, std::size_t samples = 20,
                                  double tolerance = 1e-4);

struct BenchRow {
  std::size_t length = 0;
  double median_seconds = 0.0;
  double ratio = 0.0;  // vs. the previous row when it had half the length
  bool has_ratio = false;
};

// Median of `repeats` timed selective scans per length (D channels, N
// states, f64) after one untimed warm-up run each; lengths are timed
// round-robin.
std::vector<BenchRow> bench_scan(const std::vector<std::size_t>& lengths,
                                 std::uint64_t seed, std::size_t channels = 64,
                                 std::size_t state = 16,
                                 std::size_t repeats = 5);

}  // namespace mpox

#endif  // MPOX_DIAGNOSTICS_H_
