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

// AdamW with decoupled weight decay.

#ifndef MPOX_OPTIM_H_
#define MPOX_OPTIM_H_

#include <cstddef>
#include <string>
#include <vector>

#include "mpox/module.h"

namespace mpox {

struct AdamWOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

template <typename T>
struct AdamState {
  Tensor<T> m;
  Tensor<T> v;
};

// One update at step t >= 1:
//   w -= lr * wd * w
//   m = b1 m + (1 - b1) g;  v = b2 v + (1 - b2) g^2
//   w -= lr * m_hat / (sqrt(v_hat) + eps)
// An empty `grad` counts as zero. NumericError names `name` on a
// non-finite gradient.
template <typename T>
void adamw_step(Tensor<T>& w, const Tensor<T>& grad, AdamState<T>& state,
                const AdamWOptions& opt, std::size_t t,
                const std::string& name = "parameter");

template <typename T>
class AdamW {
 public:
  AdamW(std::vector<NamedParam<T>> params, const AdamWOptions& opt);

  void step();
  void zero_grad();
  std::size_t steps() const { return t_; }

 private:
  std::vector<NamedParam<T>> params_;
  std::vector<AdamState<T>> state_;
  AdamWOptions opt_;
  std::size_t t_ = 0;
};

}  // namespace mpox

#endif  // MPOX_OPTIM_H_
