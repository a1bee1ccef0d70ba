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

// Named parameter and buffer bookkeeping shared by all layers.

#ifndef MPOX_MODULE_H_
#define MPOX_MODULE_H_

#include <string>
#include <vector>

#include "mpox/autodiff.h"
#include "mpox/random.h"

namespace mpox {

template <typename T>
struct NamedParam {
  std::string name;
  Var<T>* var;
  bool trainable = true;
};

// Non-trainable state that must survive a checkpoint (BN running stats).
template <typename T>
struct NamedBuffer {
  std::string name;
  Tensor<T>* tensor;
};

template <typename T>
struct ParamList {
  std::vector<NamedParam<T>> params;
  std::vector<NamedBuffer<T>> buffers;

  void add(const std::string& name, Var<T>& v, bool trainable = true) {
    params.push_back({name, &v, trainable});
  }
  void add_buffer(const std::string& name, Tensor<T>& t) {
    buffers.push_back({name, &t});
  }
};

inline std::string join_name(const std::string& prefix,
                             const std::string& leaf) {
  return prefix.empty() ? leaf : prefix + "." + leaf;
}

// Leaf parameter initialized in double precision and then narrowed, so f32
// and f64 models built from one seed agree up to rounding.
template <typename T>
Var<T> uniform_param(Shape shape, double bound, Rng& rng) {
  Tensor<T> t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) {
    t[i] = static_cast<T>(rng.uniform(-bound, bound));
  }
  return Var<T>(std::move(t), true);
}

template <typename T>
Var<T> constant_param(Shape shape, double value) {
  return Var<T>(Tensor<T>(std::move(shape), static_cast<T>(value)), true);
}

}  // namespace mpox

#endif  // MPOX_MODULE_H_
