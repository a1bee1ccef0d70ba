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

#include "mpox/optim.h"

#include <cmath>

namespace mpox {

template <typename T>
void adamw_step(Tensor<T>& w, const Tensor<T>& grad, AdamState<T>& state,
                const AdamWOptions& opt, std::size_t t,
                const std::string& name) {
  if (t == 0) throw DomainError("adamw_step: step index starts at 1");
  if (!grad.empty() && grad.shape() != w.shape()) {
    throw DimensionError("adamw_step: gradient shape mismatch for " + name);
  }
  if (!grad.empty() && !grad.all_finite()) {
    throw NumericError("non-finite gradient for " + name);
  }
  if (state.m.shape() != w.shape()) state.m = Tensor<T>(w.shape());
  if (state.v.shape() != w.shape()) state.v = Tensor<T>(w.shape());
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
  const T decay = static_cast<T>(1.0 - opt.lr * opt.weight_decay);
  for (std::size_t i = 0; i < w.numel(); ++i) {
    const double g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
    const double m = opt.beta1 * state.m[i] + (1.0 - opt.beta1) * g;
    const double v = opt.beta2 * state.v[i] + (1.0 - opt.beta2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    const double update = opt.lr * (m / c1) / (std::sqrt(v / c2) + opt.eps);
    w[i] = static_cast<T>(w[i] * decay - update);
  }
}

template <typename T>
AdamW<T>::AdamW(std::vector<NamedParam<T>> params, const AdamWOptions& opt)
    : opt_(opt) {
  for (auto& p : params) {
    if (p.trainable) params_.push_back(p);
  }
  state_.resize(params_.size());
}

template <typename T>
void AdamW<T>::step() {
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var<T>& v = *params_[i].var;
    adamw_step(v.mutable_value(), v.grad(), state_[i], opt_, t_,
               params_[i].name);
  }
}

template <typename T>
void AdamW<T>::zero_grad() {
  for (auto& p : params_) p.var->zero_grad();
}

template void adamw_step(Tensor<float>&, const Tensor<float>&,
                         AdamState<float>&, const AdamWOptions&, std::size_t,
                         const std::string&);
template void adamw_step(Tensor<double>&, const Tensor<double>&,
                         AdamState<double>&, const AdamWOptions&, std::size_t,
                         const std::string&);
template class AdamW<float>;
template class AdamW<double>;

}  // namespace mpox
